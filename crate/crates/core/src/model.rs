//! Gastric acid secretion dynamics.
//!
//! Twelve coupled ODEs: antral/corpal gastrin and somatostatin, histamine,
//! corpal/antral acid and bicarbonate, central and enteric neural activity,
//! and the fraction of proton pumps that are still active. Secretion terms
//! are Michaelis–Menten stimulations `K·E/(E + α)` scaled by a cell count and
//! divided by inhibition factors `1 + I/k`. Every loss term is proportional to
//! its own state, which keeps the non-negative orthant forward-invariant.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};

pub const STATE_DIM: usize = 12;

/// Component names in state-vector order. These are also the trace CSV
/// column names.
pub const STATE_NAMES: [&str; STATE_DIM] = [
    "Gtn_A", "Gtn_C", "S_A", "S_C", "H_C", "A_C", "A_A", "B_C", "B_A", "N_C", "N_E", "PP_n",
];

pub const GTN_A: usize = 0;
pub const GTN_C: usize = 1;
pub const S_A: usize = 2;
pub const S_C: usize = 3;
pub const H_C: usize = 4;
pub const A_C: usize = 5;
pub const A_A: usize = 6;
pub const B_C: usize = 7;
pub const B_A: usize = 8;
pub const N_C: usize = 9;
pub const N_E: usize = 10;
pub const PP_N: usize = 11;

/// Physiological state. Concentrations in mol/L, neural activity and the
/// pump fraction dimensionless.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GastricState {
    pub gtn_a: f64,
    pub gtn_c: f64,
    pub s_a: f64,
    pub s_c: f64,
    pub h_c: f64,
    pub a_c: f64,
    pub a_a: f64,
    pub b_c: f64,
    pub b_a: f64,
    pub n_c: f64,
    pub n_e: f64,
    pub pp_n: f64,
}

impl GastricState {
    pub fn from_array(x: [f64; STATE_DIM]) -> Self {
        Self {
            gtn_a: x[GTN_A],
            gtn_c: x[GTN_C],
            s_a: x[S_A],
            s_c: x[S_C],
            h_c: x[H_C],
            a_c: x[A_C],
            a_a: x[A_A],
            b_c: x[B_C],
            b_a: x[B_A],
            n_c: x[N_C],
            n_e: x[N_E],
            pp_n: x[PP_N],
        }
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        [
            self.gtn_a, self.gtn_c, self.s_a, self.s_c, self.h_c, self.a_c, self.a_a, self.b_c,
            self.b_a, self.n_c, self.n_e, self.pp_n,
        ]
    }

    /// Cold start: no hormones, acid or bicarbonate, all pumps active, neural
    /// activity at its basal equilibrium `Bas/k`.
    pub fn cold_start(params: &ModelParams) -> Self {
        Self {
            n_c: params.bas_1 / params.k_nc,
            n_e: params.bas_2 / params.k_ne,
            pp_n: 1.0,
            ..Self::default()
        }
    }

    /// Checks non-negativity of every component and `pp_n <= 1`, both with
    /// an absolute slack.
    pub fn check_admissible(&self, slack: f64, t: f64) -> Result<()> {
        check_admissible(&self.to_array(), slack, t)
    }
}

pub(crate) fn check_admissible(x: &[f64; STATE_DIM], slack: f64, t: f64) -> Result<()> {
    for (k, &v) in x.iter().enumerate() {
        if !v.is_finite() || v < -slack || (k == PP_N && v > 1.0 + slack) {
            return Err(Error::InvariantViolation {
                component: STATE_NAMES[k],
                value: v,
                t,
            });
        }
    }
    Ok(())
}

macro_rules! model_params {
    ($( $(#[$doc:meta])* $field:ident => $key:literal ),+ $(,)?) => {
        /// Rate constants, Michaelis constants, dissociation constants, cell
        /// counts and pharmacokinetic constants of the model.
        ///
        /// Units: hours, mol/L, milligrams, litres, g/mol. PPI concentration
        /// is carried in mmol/L, so `k_r` is in L/(mmol·h).
        #[derive(Debug, Clone, PartialEq)]
        pub struct ModelParams {
            $( $(#[$doc])* pub $field: f64, )+
        }

        impl ModelParams {
            /// Parameter-file keys, in declaration order.
            pub const KEYS: &'static [&'static str] = &[ $( $key ),+ ];

            pub fn get(&self, key: &str) -> Option<f64> {
                match key {
                    $( $key => Some(self.$field), )+
                    _ => None,
                }
            }

            /// Sets a parameter by its file key. Returns `false` for unknown keys.
            pub fn set(&mut self, key: &str, value: f64) -> bool {
                match key {
                    $( $key => { self.$field = value; true } )+
                    _ => false,
                }
            }

            fn zeroed() -> Self {
                Self { $( $field: 0.0, )+ }
            }
        }
    };
}

model_params! {
    /// G cells
    n_g => "N_G",
    /// ECL cells
    n_ecl => "N_E",
    /// antral D cells
    n_da => "N_DA",
    /// corpal D cells
    n_dc => "N_DC",
    /// parietal cells
    n_p => "N_P",

    k_ng1 => "K_NG1",
    k_ng2 => "K_NG2",
    k_fg => "K_FG",
    k_as => "K_AS",
    k_ns1 => "K_NS1",
    k_gs => "K_GS",
    k_ns2 => "K_NS2",
    k_nh => "K_NH",
    k_gh => "K_GH",
    k_ha => "K_HA",
    k_na => "K_NA",
    k_ga => "K_GA",

    alpha_ng1 => "alpha_NG1",
    alpha_ng2 => "alpha_NG2",
    alpha_fd => "alpha_FD",
    alpha_as => "alpha_AS",
    alpha_ns1 => "alpha_NS1",
    alpha_gs => "alpha_GS",
    alpha_ns2 => "alpha_NS2",
    alpha_nh => "alpha_NH",
    alpha_gh => "alpha_GH",
    alpha_ha => "alpha_HA",
    alpha_na => "alpha_NA",
    /// histamine potentiation of the gastrin-driven acid term
    alpha_h => "alpha_H",
    alpha_nb => "alpha_NB",
    alpha_ga => "alpha_GA",

    k_sg => "k_SG",
    /// gastrin sensitivity to corpal acid; larger means more severe
    k_ag => "k_AG",
    k_ss => "k_SS",
    k_ns => "k_NS",
    k_sh => "k_SH",
    k_sa => "k_SA",

    k_g => "k_G",
    beta_g => "beta_G",
    k_s => "k_S",
    k_h => "k_H",
    beta_a => "beta_A",
    k_a => "k_A",
    k_b => "k_B",
    k_bc => "k_bc",
    k_ba => "k_ba",
    /// bicarbonate buffering, 1/(M·h)
    hb => "hb",

    n_1 => "N_1",
    n_2 => "N_2",
    k1_fd => "k1_Fd",
    k2_fd => "k2_Fd",
    k_an1 => "k_AN1",
    k_an2 => "k_AN2",
    k_nc => "k_NC",
    k_ne => "k_NE",
    bas_1 => "Bas_1",
    bas_2 => "Bas_2",

    /// proton pump regeneration, 1/h
    k_deg => "K_deg",
    /// PPI–pump bimolecular rate, L/(mmol·h)
    k_r => "K_r",
    /// volume of distribution, L
    volume => "V",
    /// PPI molar mass, g/mol
    molar_mass => "m",
    /// elimination rate, 1/h
    k_el => "K_el",
}

const DEFAULT_PARAMS: &str = include_str!("../params/default.toml");

impl Default for ModelParams {
    fn default() -> Self {
        Self::calibrated()
    }
}

impl ModelParams {
    /// The shipped calibration (`params/default.toml`).
    pub fn calibrated() -> Self {
        Self::from_toml_str(DEFAULT_PARAMS).expect("bundled parameter file is valid")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
            .map_err(|e| Error::Params(format!("{}: {}", path.display(), strip_prefix(e))))
    }

    /// Parses a flat `key = value` document. Every key must be present,
    /// known, and strictly positive; all problems are reported together.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| {
            Error::Params(e.to_string().trim_end().to_string())
        })?;
        let mut params = Self::zeroed();
        let mut problems = Vec::new();
        for (key, value) in &table {
            let number = match value {
                toml::Value::Float(f) => *f,
                toml::Value::Integer(i) => *i as f64,
                other => {
                    problems.push(format!("{key}: expected a number, found {}", other.type_str()));
                    continue;
                }
            };
            if !params.set(key, number) {
                problems.push(format!("unknown key `{key}`"));
            } else if !(number > 0.0 && number.is_finite()) {
                problems.push(format!("{key} must be positive, got {number}"));
            }
        }
        for key in Self::KEYS {
            if !table.contains_key(*key) {
                problems.push(format!("missing key `{key}`"));
            }
        }
        if problems.is_empty() {
            Ok(params)
        } else {
            Err(Error::Params(problems.join("; ")))
        }
    }

    pub fn to_toml_string(&self) -> String {
        let mut out = String::new();
        for key in Self::KEYS {
            out.push_str(&format!("{key} = {:e}\n", self.get(key).unwrap()));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let bad: Vec<String> = Self::KEYS
            .iter()
            .filter(|k| !(self.get(k).unwrap() > 0.0))
            .map(|k| format!("{k} must be positive"))
            .collect();
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::Params(bad.join("; ")))
        }
    }

    /// All parameters as an ordered map, handy for reporting.
    pub fn to_map(&self) -> BTreeMap<&'static str, f64> {
        Self::KEYS.iter().map(|k| (*k, self.get(k).unwrap())).collect()
    }

    /// Scale that converts a dose in mg to a blood concentration in mmol/L.
    pub fn dose_to_concentration(&self) -> f64 {
        1.0 / (self.volume * self.molar_mass)
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::Params(msg) => msg,
        other => other.to_string(),
    }
}

/// One meal pulse: `amplitude·(1 + tanh(steepness·Δ))·exp(-decay_scale·(1 + decay_rate·Δ))`
/// with `Δ = t - (day_start + offset)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Meal {
    pub offset: f64,
    pub amplitude: f64,
}

/// Daily food-intake forcing. The pulse sum is re-anchored at every
/// midnight, so the profile is exactly 24 h periodic. The re-anchoring drops
/// the tail of the previous evening's pulse, which leaves a jump of about
/// 3·10⁻⁴ at each midnight with the default shape.
#[derive(Debug, Clone, PartialEq)]
pub struct FoodProfile {
    pub meals: Vec<Meal>,
    pub steepness: f64,
    pub decay_scale: f64,
    pub decay_rate: f64,
}

impl Default for FoodProfile {
    fn default() -> Self {
        Self {
            meals: vec![
                Meal { offset: 7.0, amplitude: 0.4 },
                Meal { offset: 13.0, amplitude: 1.0 },
                Meal { offset: 19.0, amplitude: 1.6 },
            ],
            steepness: PI,
            decay_scale: 0.5,
            decay_rate: 3.5,
        }
    }
}

impl FoodProfile {
    /// No food at all.
    pub fn fasting() -> Self {
        Self {
            meals: Vec::new(),
            ..Self::default()
        }
    }

    pub fn level(&self, t: f64) -> f64 {
        self.level_in_day(t, day_start(t))
    }

    /// Evaluates the pulses anchored at `day_start` rather than at
    /// `floor(t/24)`. The integrator uses this to take the left limit at
    /// midnight.
    pub fn level_in_day(&self, t: f64, day_start: f64) -> f64 {
        self.meals
            .iter()
            .map(|meal| {
                let d = t - (day_start + meal.offset);
                meal.amplitude
                    * (1.0 + (self.steepness * d).tanh())
                    * (-self.decay_scale * (1.0 + self.decay_rate * d)).exp()
            })
            .sum()
    }
}

pub fn day_start(t: f64) -> f64 {
    24.0 * (t / 24.0).floor()
}

pub fn food_intake(t: f64, profile: &FoodProfile) -> f64 {
    profile.level(t)
}

/// Time derivative of the full state at `t`, with the PPI blood level
/// supplied by the caller.
pub fn derivative(
    state: &GastricState,
    t: f64,
    params: &ModelParams,
    ppi_level: f64,
    profile: &FoodProfile,
) -> Result<[f64; STATE_DIM]> {
    rhs(&state.to_array(), t, profile.level(t), ppi_level, params)
}

#[inline]
fn stimulation(max_rate: f64, x: f64, alpha: f64, term: &'static str, t: f64) -> Result<f64> {
    let den = x + alpha;
    if den == 0.0 {
        return Err(Error::Domain { term, t });
    }
    Ok(max_rate * x / den)
}

#[inline]
fn inhibition(x: f64, k: f64, term: &'static str, t: f64) -> Result<f64> {
    if k == 0.0 {
        return Err(Error::Domain { term, t });
    }
    Ok(1.0 + x / k)
}

/// `1 + A²/(A² + k²)`, the squared acid gate on gastrin and neural activity.
#[inline]
fn acid_gate(acid: f64, k: f64, term: &'static str, t: f64) -> Result<f64> {
    let a2 = acid * acid;
    let den = a2 + k * k;
    if den == 0.0 {
        return Err(Error::Domain { term, t });
    }
    Ok(1.0 + a2 / den)
}

/// Right-hand side on the raw state vector with explicit forcing values.
pub fn rhs(
    x: &[f64; STATE_DIM],
    t: f64,
    food: f64,
    ppi: f64,
    p: &ModelParams,
) -> Result<[f64; STATE_DIM]> {
    let [gtn_a, gtn_c, s_a, s_c, h_c, a_c, a_a, b_c, b_a, n_c, n_e, pp_n] = *x;

    let gastrin_inhibition = inhibition(s_a, p.k_sg, "k_SG", t)? * acid_gate(a_c, p.k_ag, "k_AG", t)?;
    let gastrin_release = p.n_g
        * (stimulation(p.k_ng1, n_e, p.alpha_ng1, "alpha_NG1", t)?
            + stimulation(p.k_ng2, n_c, p.alpha_ng2, "alpha_NG2", t)?
            + stimulation(p.k_fg, food, p.alpha_fd, "alpha_FD", t)?)
        / gastrin_inhibition;
    let d_gtn_a = gastrin_release - (p.k_g + p.beta_g) * gtn_a;
    let d_gtn_c = p.beta_g * gtn_a - p.k_g * gtn_c;

    let cns_inhibition = inhibition(n_c, p.k_ns, "k_NS", t)?;
    let d_s_a = p.n_da
        * (stimulation(p.k_as, a_a, p.alpha_as, "alpha_AS", t)?
            + stimulation(p.k_ns1, n_e, p.alpha_ns1, "alpha_NS1", t)?)
        / (inhibition(s_a, p.k_ss, "k_SS", t)? * cns_inhibition)
        - p.k_s * s_a;
    let d_s_c = p.n_dc
        * (stimulation(p.k_gs, gtn_c, p.alpha_gs, "alpha_GS", t)?
            + stimulation(p.k_ns2, n_e, p.alpha_ns2, "alpha_NS2", t)?)
        / (inhibition(s_c, p.k_ss, "k_SS", t)? * cns_inhibition)
        - p.k_s * s_c;

    let d_h_c = p.n_ecl
        * (stimulation(p.k_nh, n_e, p.alpha_nh, "alpha_NH", t)?
            + stimulation(p.k_gh, gtn_c, p.alpha_gh, "alpha_GH", t)?)
        / inhibition(s_c, p.k_sh, "k_SH", t)?
        - p.k_h * h_c;

    // Three parietal-cell secretion routes, all gated by the active pump
    // fraction; the gastrin route is potentiated by histamine.
    let parietal = pp_n * p.n_p / inhibition(s_c, p.k_sa, "k_SA", t)?;
    let potentiation = stimulation(1.0, h_c, p.alpha_h, "alpha_H", t)?;
    let secretion = parietal
        * (stimulation(p.k_ha, h_c, p.alpha_ha, "alpha_HA", t)?
            + stimulation(p.k_na, n_c, p.alpha_na, "alpha_NA", t)?
            + potentiation * stimulation(p.k_ga, gtn_c, p.alpha_ga, "alpha_GA", t)?);
    let buffer_c = p.hb * a_c * b_c;
    let buffer_a = p.hb * a_a * b_a;
    let d_a_c = secretion - buffer_c - p.beta_a * a_c;
    let d_a_a = p.beta_a * a_c - p.k_a * a_a;

    let d_b_c = stimulation(p.k_bc, n_c, p.alpha_nb, "alpha_NB", t)? - buffer_c - p.k_b * b_c;
    let d_b_a = stimulation(p.k_ba, n_c, p.alpha_nb, "alpha_NB", t)? - buffer_a - p.k_b * b_a;

    let d_n_c = stimulation(p.n_1, food, p.k1_fd, "k1_Fd", t)? / acid_gate(a_c, p.k_an1, "k_AN1", t)?
        - p.k_nc * n_c
        + p.bas_1;
    let d_n_e = stimulation(p.n_2, food, p.k2_fd, "k2_Fd", t)? / acid_gate(a_c, p.k_an2, "k_AN2", t)?
        - p.k_ne * n_e
        + p.bas_2;

    let d_pp_n = p.k_deg - p.k_r * ppi * pp_n - p.k_deg * pp_n;

    Ok([
        d_gtn_a, d_gtn_c, d_s_a, d_s_c, d_h_c, d_a_c, d_a_a, d_b_c, d_b_a, d_n_c, d_n_e, d_pp_n,
    ])
}
