//! Pipeline-wide knobs shared by the subcommands.

use crate::aligner::DEFAULT_WINDOW;
use crate::encoder::DEFAULT_L_MAX;
use crate::lsh::{DEFAULT_NUM_PERMS, DEFAULT_SHINGLE_K, DEFAULT_THRESHOLD};
use crate::split::DEFAULT_TRAIN_FRACTION;
use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub threshold: f64,
    pub num_perms: usize,
    pub shingle_k: usize,
    pub window: usize,
    pub l_max: usize,
    pub seed: u64,
    pub split: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            threshold: DEFAULT_THRESHOLD,
            num_perms: DEFAULT_NUM_PERMS,
            shingle_k: DEFAULT_SHINGLE_K,
            window: DEFAULT_WINDOW,
            l_max: DEFAULT_L_MAX,
            seed: 0,
            split: DEFAULT_TRAIN_FRACTION,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), Error> {
        let fail = |m: String| Err(Error::InvalidInput(m));
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return fail(format!("threshold {} must lie in (0, 1)", self.threshold));
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            return fail(format!("split {} must lie in (0, 1)", self.split));
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.num_perms == 0 || self.shingle_k == 0 || self.l_max == 0 {
            return fail("num_perms, shingle_k and l_max must be positive".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PipelineConfig::default();
        c.validate().unwrap();
        assert_eq!((c.threshold, c.num_perms, c.shingle_k, c.window, c.l_max, c.split), (0.95, 128, 3, 10, 512, 0.8));
    }

    #[test]
    fn out_of_range_values_fail() {
        for bad in [
            PipelineConfig { threshold: 1.0, ..Default::default() },
            PipelineConfig { threshold: 0.0, ..Default::default() },
            PipelineConfig { split: 1.0, ..Default::default() },
            PipelineConfig { window: 0, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
