use std::fmt;
use std::str::FromStr;

/// A gap to impute: `length` rows starting at 1-based data row `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapSpec {
    pub start: usize,
    pub length: usize,
}

impl GapSpec {
    /// Zero-based record range.
    pub fn rows(&self) -> std::ops::Range<usize> {
        self.start - 1..self.start - 1 + self.length
    }
}

impl fmt::Display for GapSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.start, self.length)
    }
}

impl FromStr for GapSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| format!("gap {s:?} is not START:LENGTH"))?;
        let start: usize = a.trim().parse().map_err(|_| format!("gap {s:?}: bad start row"))?;
        let length: usize = b.trim().parse().map_err(|_| format!("gap {s:?}: bad length"))?;
        if start == 0 {
            return Err(format!("gap {s:?}: rows are numbered from 1"));
        }
        Ok(GapSpec { start, length })
    }
}
