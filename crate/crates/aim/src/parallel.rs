// SPDX-License-Identifier: Apache-2.0

//! Multi-threaded drivers: cascade chains of one multiplication in parallel,
//! and Mandelbrot pixels pulled from a shared queue by worker threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use aim_core::engine::{execute_chain, Engine, EngineError};
use aim_core::mandelbrot::{
    divergence_test, engine_for, FixedError, FixedMul, IterationMap, RenderStats, ViewPort,
};
use num_bigint::BigUint;
use rayon::prelude::*;

/// One multiplication with the cascade chains spread over the rayon pool.
pub fn multiply_parallel(engine: &Engine, a: &BigUint, b: &BigUint) -> Result<BigUint, EngineError> {
    let (pa, pb) = engine.prepare_operands(a, b)?;
    let grid = engine.grid();
    let outputs = grid
        .chains
        .par_iter()
        .map(|chain| execute_chain(grid, chain, &pa, &pb))
        .collect::<Result<Vec<_>, _>>()?;
    engine.finish(outputs)
}

/// Renders on `threads` OS threads. Each worker takes the next unclaimed
/// pixel; results land in their own slots so the map is schedule-independent.
pub fn render_threaded(
    vp: &ViewPort,
    frac_bits: u32,
    max_iter: u32,
    threads: usize,
) -> Result<(IterationMap, RenderStats), FixedError> {
    vp.validate()?;
    let engine = engine_for(frac_bits)?;
    let n = vp.width * vp.height;
    let next = AtomicUsize::new(0);
    let counts = Mutex::new(vec![0u32; n]);
    let iterations = AtomicUsize::new(0);
    let first_error: Mutex<Option<FixedError>> = Mutex::new(None);
    std::thread::scope(|s| {
        for _ in 0..threads.max(1) {
            s.spawn(|| {
                let mut fm = match FixedMul::new(&engine, frac_bits) {
                    Ok(fm) => fm,
                    Err(e) => {
                        first_error.lock().unwrap().get_or_insert(e);
                        return;
                    }
                };
                loop {
                    let idx = next.fetch_add(1, Ordering::Relaxed);
                    if idx >= n {
                        break;
                    }
                    let (re, im) = vp.pixel(idx % vp.width, idx / vp.width, frac_bits);
                    match divergence_test(&re, &im, max_iter, &mut fm) {
                        Ok(out) => {
                            counts.lock().unwrap()[idx] = out.count;
                            iterations.fetch_add(out.iterations_run as usize, Ordering::Relaxed);
                        }
                        Err(e) => {
                            first_error.lock().unwrap().get_or_insert(e);
                            break;
                        }
                    }
                }
            });
        }
    });
    if let Some(e) = first_error.into_inner().unwrap() {
        return Err(e);
    }
    let map = IterationMap {
        width: vp.width,
        height: vp.height,
        max_iter,
        counts: counts.into_inner().unwrap(),
    };
    let stats = RenderStats {
        multiplications: engine.stats().multiplications,
        iterations: iterations.into_inner() as u64,
        makespan: 0,
    };
    Ok((map, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use aim_core::mandelbrot::{fp_from_decimal, render};
    use aim_core::ArrayConfig;
    use num_traits::One;

    #[test]
    fn parallel_chains_match_serial() {
        let e = Engine::new(ArrayConfig::new(4096, 1, 5, 7).unwrap()).unwrap();
        let a = (BigUint::one() << 4095u32) + 12345u32;
        let b = (BigUint::one() << 4000u32) - 1u32;
        assert_eq!(multiply_parallel(&e, &a, &b).unwrap(), &a * &b);
        assert_eq!(e.stats().multiplications, 1);
        assert_eq!(e.stats().products, e.grid().planned_products());
    }

    #[test]
    fn threaded_render_matches_logical_scheduler() {
        let vp = ViewPort {
            center_re: fp_from_decimal("-0.5", 48).unwrap(),
            center_im: fp_from_decimal("0", 48).unwrap(),
            scale: fp_from_decimal("1.5", 48).unwrap(),
            width: 12,
            height: 8,
        };
        let (serial, s) = render(&vp, 48, 25, 1).unwrap();
        for threads in [1, 3] {
            let (m, t) = render_threaded(&vp, 48, 25, threads).unwrap();
            assert_eq!(m, serial);
            assert_eq!(t.multiplications, s.multiplications);
        }
    }
}
