use qudit_learn_core::experiments::TrialRunner;
use rayon::prelude::*;

/// Runs seeded jobs on a fixed-size thread pool, keeping seed order in the output.
pub struct RayonRunner {
    pool: rayon::ThreadPool,
}

impl RayonRunner {
    pub fn new(workers: usize) -> Result<Self, rayon::ThreadPoolBuildError> {
        Ok(RayonRunner { pool: rayon::ThreadPoolBuilder::new().num_threads(workers.max(1)).build()? })
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl TrialRunner for RayonRunner {
    fn run<T, F>(&self, seeds: &[u64], job: F) -> Vec<T>
    where
        T: Send,
        F: Fn(u64) -> T + Sync + Send,
    {
        self.pool.install(|| seeds.par_iter().map(|&s| job(s)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qudit_learn_core::experiments::SequentialRunner;

    #[test]
    fn matches_sequential_order() {
        let seeds: Vec<u64> = (0..64).collect();
        let job = |s: u64| s.wrapping_mul(0x9e37_79b9_7f4a_7c15);
        let par = RayonRunner::new(4).unwrap().run(&seeds, job);
        assert_eq!(par, SequentialRunner.run(&seeds, job));
    }
}
