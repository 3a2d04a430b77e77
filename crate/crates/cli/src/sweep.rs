use gflame_core::FlowKind;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Intensities of an `s_T(A)` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub flow: FlowKind,
    pub values: Vec<f64>,
}

impl SweepSpec {
    pub fn new(flow: FlowKind, values: Vec<f64>) -> Result<Self, CliError> {
        if values.is_empty() {
            return Err(CliError::Usage("sweep has no intensities".into()));
        }
        if let Some(bad) = values.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
            return Err(CliError::Usage(format!("intensity {bad} is not a finite value >= 0")));
        }
        if values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::Usage("sweep intensities must be strictly increasing".into()));
        }
        Ok(Self { flow, values })
    }

    /// `0,1,2,4`
    pub fn parse_list(text: &str) -> Result<Vec<f64>, CliError> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>().map_err(|e| CliError::Usage(format!("bad intensity `{s}`: {e}"))))
            .collect()
    }

    /// `start:stop:step`, stop included when it lies on the lattice.
    pub fn parse_range(text: &str) -> Result<Vec<f64>, CliError> {
        let parts: Vec<&str> = text.split(':').map(str::trim).collect();
        let [start, stop, step] = parts[..] else {
            return Err(CliError::Usage(format!("range `{text}` is not start:stop:step")));
        };
        let num = |s: &str| s.parse::<f64>().map_err(|e| CliError::Usage(format!("bad range bound `{s}`: {e}")));
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        if !(step > 0.0) || stop < start {
            return Err(CliError::Usage(format!("range `{text}` is empty or has a nonpositive step")));
        }
        let count = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=count).map(|m| start + m as f64 * step).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_and_ranges() {
        assert_eq!(SweepSpec::parse_list("0, 1,2,4").unwrap(), vec![0.0, 1.0, 2.0, 4.0]);
        assert_eq!(SweepSpec::parse_range("0:4:1").unwrap(), vec![0.0, 1.0, 2.0, 3.0, 4.0]);
        assert_eq!(SweepSpec::parse_range("0:1:0.25").unwrap().len(), 5);
        assert!(SweepSpec::parse_range("0:4").is_err());
        assert!(SweepSpec::parse_range("4:0:1").is_err());
        assert!(SweepSpec::parse_list("1,x").is_err());
    }

    #[test]
    fn validation() {
        assert!(SweepSpec::new(FlowKind::Abc, vec![]).is_err());
        assert!(SweepSpec::new(FlowKind::Abc, vec![1.0, 1.0]).is_err());
        assert!(SweepSpec::new(FlowKind::Abc, vec![-1.0]).is_err());
        assert!(SweepSpec::new(FlowKind::Abc, vec![0.0, 0.5]).is_ok());
    }
}
