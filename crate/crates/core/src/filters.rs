//! Conjugate-mirror filter table.
//!
//! Rows have the form `name, length, h_0, ..., h_{L-1}, alpha_default`.
//! Blank lines and lines starting with `#` are ignored.

use crate::error::{Error, Result};

pub const DEFAULT_TABLE: &str = include_str!("filters.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct Filter {
    name: String,
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
    alpha_default: f64,
}

impl Filter {
    pub fn new(name: &str, lowpass: Vec<f64>, alpha_default: f64) -> Result<Self> {
        let len = lowpass.len();
        if len < 2 || !len.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("filter '{name}' must have even length >= 2")));
        }
        let sum: f64 = lowpass.iter().sum();
        if (sum - std::f64::consts::SQRT_2).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!("filter '{name}' taps sum to {sum}, expected sqrt(2)")));
        }
        for shift in (0..len).step_by(2) {
            let dot: f64 = (0..len - shift).map(|t| lowpass[t] * lowpass[t + shift]).sum();
            let expected = if shift == 0 { 1.0 } else { 0.0 };
            if (dot - expected).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "filter '{name}' not orthonormal at shift {shift} ({dot:e})"
                )));
            }
        }
        if !(0.0..=1.0).contains(&alpha_default) {
            return Err(Error::InvalidArgument(format!("filter '{name}' alpha_default {alpha_default} not in [0,1]")));
        }
        let highpass = (0..len)
            .map(|t| if t % 2 == 0 { lowpass[len - 1 - t] } else { -lowpass[len - 1 - t] })
            .collect();
        Ok(Self { name: name.to_string(), lowpass, highpass, alpha_default })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.lowpass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lowpass.is_empty()
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    /// `g_t = (-1)^t h_{L-1-t}`.
    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    /// Configured Hoelder exponent; zero marks a discontinuous system.
    pub fn alpha_default(&self) -> f64 {
        self.alpha_default
    }

    pub fn is_smooth(&self) -> bool {
        self.alpha_default > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterTable {
    filters: Vec<Filter>,
}

impl FilterTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut filters = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| Error::FilterTable { line: lineno + 1, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() < 4 {
                return Err(err("expected name, length, coefficients, alpha".into()));
            }
            let name = fields[0];
            let len: usize = fields[1].parse().map_err(|_| err(format!("bad length '{}'", fields[1])))?;
            if fields.len() != len + 3 {
                return Err(err(format!("length {len} but {} coefficients", fields.len() - 3)));
            }
            let nums = fields[2..]
                .iter()
                .map(|f| f.parse::<f64>().map_err(|_| err(format!("bad number '{f}'"))))
                .collect::<Result<Vec<_>>>()?;
            let alpha = nums[len];
            let filter = Filter::new(name, nums[..len].to_vec(), alpha).map_err(|e| err(e.to_string()))?;
            filters.push(filter);
        }
        Ok(Self { filters })
    }

    pub fn get(&self, name: &str) -> Result<&Filter> {
        self.filters
            .iter()
            .find(|f| f.name == name)
            .ok_or_else(|| Error::UnknownFilter(name.to_string()))
    }

    pub fn filters(&self) -> &[Filter] {
        &self.filters
    }

    /// Shortest filter with a positive Hoelder exponent.
    pub fn shortest_smooth(&self) -> Option<&Filter> {
        self.filters.iter().filter(|f| f.is_smooth()).min_by_key(|f| f.len())
    }
}

impl Default for FilterTable {
    fn default() -> Self {
        Self::parse(DEFAULT_TABLE).expect("shipped filter table is valid")
    }
}
