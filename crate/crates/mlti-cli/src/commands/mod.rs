pub mod decompose;
pub mod heat;
pub mod identify;
pub mod reduce;
pub mod synth;

use std::time::Instant;

use crate::CliResult;

/// Wall time of `f`, averaged over repeats until the total passes 50 ms so
/// sub-millisecond runs still produce a usable number.
pub fn timed<T>(mut f: impl FnMut() -> CliResult<T>) -> CliResult<(T, f64)> {
    let start = Instant::now();
    let mut out = f()?;
    let mut reps = 1u32;
    while start.elapsed().as_secs_f64() < 0.05 && reps < 32 {
        out = f()?;
        reps += 1;
    }
    Ok((out, start.elapsed().as_secs_f64() / reps as f64))
}
