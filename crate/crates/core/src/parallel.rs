/// Worker-thread count for the embarrassingly parallel stages (steering,
/// PSF assembly, DAS map). Results never depend on the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Parallelism(usize);

impl Parallelism {
    pub fn new(threads: usize) -> Self {
        Self(threads.max(1))
    }

    pub fn threads(self) -> usize {
        self.0
    }

    /// Runs `f` inside a dedicated rayon pool of this width.
    pub fn install<R: Send>(self, f: impl FnOnce() -> R + Send) -> R {
        match rayon::ThreadPoolBuilder::new().num_threads(self.0).build() {
            Ok(pool) => pool.install(f),
            // Fall back to the global pool if a dedicated one cannot be spawned.
            Err(_) => f(),
        }
    }
}

impl Default for Parallelism {
    fn default() -> Self {
        Self::new(std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}
