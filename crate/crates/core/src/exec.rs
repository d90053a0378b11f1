//! Point-level data parallelism with an order-preserving sequential fallback.
//!
//! Results always come back in input order, so reductions over them are
//! deterministic whichever mode ran.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecMode {
    /// Rayon work stealing when the `parallel` feature is on; sequential otherwise.
    #[default]
    Parallel,
    Sequential,
}

impl ExecMode {
    pub fn map<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match self {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => {
                use rayon::prelude::*;
                items.par_iter().map(f).collect()
            }
            _ => items.iter().map(f).collect(),
        }
    }

    /// Like [`ExecMode::map`], also passing each item's position.
    pub fn map_indexed<T, R, F>(self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        let indexed: Vec<(usize, &T)> = items.iter().enumerate().collect();
        self.map(&indexed, |(i, t)| f(*i, t))
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes_agree_and_keep_order() {
        let xs: Vec<u64> = (0..200).collect();
        let a = ExecMode::Parallel.map(&xs, |x| x * x);
        let b = ExecMode::Sequential.map(&xs, |x| x * x);
        assert_eq!(a, b);
        assert_eq!(ExecMode::Parallel.map_indexed(&xs, |i, x| i as u64 + x)[7], 14);
    }
}
