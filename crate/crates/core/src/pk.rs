//! Dose schedules and single-compartment PPI blood concentration.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// One administration: `slot` is 1-based within `day` (also 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseEvent {
    pub day: u32,
    pub slot: u32,
    #[serde(rename = "time_h")]
    pub time: f64,
    #[serde(rename = "dose_mg")]
    pub amount: f64,
}

/// Doses ordered by strictly increasing time.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DoseSchedule {
    events: Vec<DoseEvent>,
}

impl DoseSchedule {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_events(events: impl IntoIterator<Item = DoseEvent>) -> Result<Self> {
        let mut schedule = Self::new();
        for e in events {
            schedule.push(e)?;
        }
        Ok(schedule)
    }

    /// Appends a dose; it must come strictly after the last one.
    pub fn push(&mut self, event: DoseEvent) -> Result<()> {
        if !(event.amount >= 0.0 && event.amount.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "dose amount must be non-negative, got {}",
                event.amount
            )));
        }
        if !event.time.is_finite() {
            return Err(Error::InvalidInput("dose time must be finite".into()));
        }
        if let Some(last) = self.events.last() {
            if event.time <= last.time {
                return Err(Error::InvalidInput(format!(
                    "dose times must strictly increase ({} after {})",
                    event.time, last.time
                )));
            }
        }
        self.events.push(event);
        Ok(())
    }

    /// Copy of the schedule with one more dose appended.
    pub fn with(&self, event: DoseEvent) -> Result<Self> {
        let mut next = self.clone();
        next.push(event)?;
        Ok(next)
    }

    pub fn events(&self) -> &[DoseEvent] {
        &self.events
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.time)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["day", "slot", "time_h", "dose_mg"])?;
        for e in &self.events {
            w.serialize((e.day, e.slot, e.time, e.amount))?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let events = r
            .deserialize::<DoseEvent>()
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Self::from_events(events)
    }
}

/// Blood level at `t` from every dose given at or before `t`, in mmol/L.
pub fn ppi_concentration(t: f64, schedule: &DoseSchedule, params: &ModelParams) -> f64 {
    concentration_where(schedule, params, t, |time| time <= t)
}

/// Left limit at `t`: doses given exactly at `t` are not yet included.
pub fn ppi_concentration_before(t: f64, schedule: &DoseSchedule, params: &ModelParams) -> f64 {
    concentration_where(schedule, params, t, |time| time < t)
}

fn concentration_where(
    schedule: &DoseSchedule,
    params: &ModelParams,
    t: f64,
    active: impl Fn(f64) -> bool,
) -> f64 {
    let scale = params.dose_to_concentration();
    schedule
        .events
        .iter()
        .filter(|e| active(e.time))
        .map(|e| e.amount * scale * (-params.k_el * (t - e.time)).exp())
        .sum()
}

pub fn total_intake(schedule: &DoseSchedule) -> f64 {
    schedule.events.iter().map(|e| e.amount).sum()
}
