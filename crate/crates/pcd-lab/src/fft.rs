//! N-dimensional complex FFT on cubic grids with a process-wide plan cache.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

struct Plans {
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

fn plans(m: usize) -> Arc<Plans> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Plans>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry(m)
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            Arc::new(Plans {
                fwd: planner.plan_fft_forward(m),
                inv: planner.plan_fft_inverse(m),
            })
        })
        .clone()
}

/// Unnormalized transform of a row-major `m^dim` array along every axis.
/// `inverse = true` uses the `e^{+2πi kn/m}` kernel.
pub fn fftn(data: &mut [Complex64], dim: usize, m: usize, inverse: bool) {
    debug_assert_eq!(data.len(), m.pow(dim as u32));
    let p = plans(m);
    let plan = if inverse { &p.inv } else { &p.fwd };
    let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
    let total = data.len();
    let mut lines = Vec::new();
    for axis in 0..dim {
        let stride = m.pow((dim - 1 - axis) as u32);
        if stride == 1 {
            plan.process_with_scratch(data, &mut scratch);
            continue;
        }
        lines.resize(total, Complex64::default());
        let block = m * stride;
        let mut line = 0;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let dst = &mut lines[line * m..(line + 1) * m];
                for (l, d) in dst.iter_mut().enumerate() {
                    *d = data[base + l * stride];
                }
                line += 1;
            }
        }
        plan.process_with_scratch(&mut lines, &mut scratch);
        let mut line = 0;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                let src = &lines[line * m..(line + 1) * m];
                for (l, s) in src.iter().enumerate() {
                    data[base + l * stride] = *s;
                }
                line += 1;
            }
        }
    }
}
