//! Host-side reference computations. These deliberately avoid the rule
//! engine and its value layer so they can serve as test oracles.

use chrono::{Datelike, NaiveDate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("reference date {reference} precedes birth date {birth}")]
    BeforeBirth { birth: NaiveDate, reference: NaiveDate },
}

/// Body mass index, kg/m².
pub fn bmi_reference(weight_kg: f64, height_m: f64) -> Result<f64, OracleError> {
    for (name, value) in [("weight", weight_kg), ("height", height_m)] {
        if value.is_nan() || value <= 0.0 {
            return Err(OracleError::NonPositive { name, value });
        }
    }
    Ok(weight_kg / (height_m * height_m))
}

/// Number of birthdays on or before `reference`. A 29 February birthday
/// falls on 1 March in common years.
pub fn age_reference(birth: NaiveDate, reference: NaiveDate) -> Result<i64, OracleError> {
    if reference < birth {
        return Err(OracleError::BeforeBirth { birth, reference });
    }
    let birthday = |year: i32| {
        NaiveDate::from_ymd_opt(year, birth.month(), birth.day())
            .unwrap_or_else(|| NaiveDate::from_ymd_opt(year, 3, 1).expect("1 March exists"))
    };
    let mut age = 0;
    while birthday(birth.year() + age as i32 + 1) <= reference {
        age += 1;
    }
    Ok(age)
}

/// Whether the BMI rule may fire for one weight/length pair: the weight may
/// precede the length by at most 7 days and follow it by at most two
/// 365-day years, and the person is at least 18 at the later date.
pub fn gate_reference(weight_date: NaiveDate, length_date: NaiveDate, birth: NaiveDate) -> bool {
    const DAY: i64 = 86_400;
    let delta = (weight_date - length_date).num_days() * DAY;
    let delay_ok = (-7 * DAY..=730 * DAY).contains(&delta);
    let later = weight_date.max(length_date);
    delay_ok && age_reference(birth, later).is_ok_and(|age| age >= 18)
}
