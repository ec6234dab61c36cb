//! Exact Euclidean distance transform on a regular 3D grid with anisotropic
//! spacing, by separable lower envelopes of parabolas (one pass per axis).

use alloc::vec;
use alloc::vec::Vec;

use crate::math::sqrt;

/// Squared distance transform along one line. `f` holds the input costs
/// (0 at sites, `f64::INFINITY` elsewhere, or the partial result of a previous
/// axis), `spacing` is the physical sample spacing. Output goes to `out`.
///
/// Scratch buffers `v` and `z` must hold at least `f.len()` and
/// `f.len() + 1` entries.
pub fn squared_dt_1d(f: &[f64], spacing: f64, out: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let s2 = spacing * spacing;
    // Lower envelope over the finite parabolas only.
    let mut k = 0usize;
    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            started = true;
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            continue;
        }
        let qf = q as f64;
        loop {
            let p = v[k];
            let pf = p as f64;
            // intersection abscissa, in index units, of the parabolas rooted at p and q
            let s = ((f[q] + s2 * qf * qf) - (f[p] + s2 * pf * pf)) / (2.0 * s2 * (qf - pf));
            // z[0] is -inf so this never underflows k
            if s <= z[k] {
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    if !started {
        out[..n].iter_mut().for_each(|o| *o = f64::INFINITY);
        return;
    }
    let mut j = 0usize;
    for (q, o) in out.iter_mut().enumerate().take(n) {
        let qf = q as f64;
        while z[j + 1] < qf {
            j += 1;
        }
        let p = v[j] as f64;
        *o = s2 * (qf - p) * (qf - p) + f[v[j]];
    }
}

/// Euclidean distance (in physical units) from each cell center to the nearest
/// site cell center. Layout is x-fastest: `i + nx * (j + ny * k)`.
/// Returns all-infinite distances when there are no sites.
pub fn distance_transform(sites: &[bool], dims: [usize; 3], spacing: [f64; 3]) -> Vec<f64> {
    let [nx, ny, nz] = dims;
    assert_eq!(sites.len(), nx * ny * nz);
    let mut d: Vec<f64> = sites
        .iter()
        .map(|&s| if s { 0.0 } else { f64::INFINITY })
        .collect();
    let nmax = nx.max(ny).max(nz);
    let mut line = vec![0.0; nmax];
    let mut out = vec![0.0; nmax];
    let mut v = vec![0usize; nmax];
    let mut z = vec![0.0; nmax + 1];

    // x lines are contiguous
    for base in (0..d.len()).step_by(nx) {
        line[..nx].copy_from_slice(&d[base..base + nx]);
        squared_dt_1d(&line[..nx], spacing[0], &mut out[..nx], &mut v, &mut z);
        d[base..base + nx].copy_from_slice(&out[..nx]);
    }
    // y lines
    for k in 0..nz {
        for i in 0..nx {
            let base = i + nx * ny * k;
            for j in 0..ny {
                line[j] = d[base + nx * j];
            }
            squared_dt_1d(&line[..ny], spacing[1], &mut out[..ny], &mut v, &mut z);
            for j in 0..ny {
                d[base + nx * j] = out[j];
            }
        }
    }
    // z lines
    let plane = nx * ny;
    for base in 0..plane {
        for k in 0..nz {
            line[k] = d[base + plane * k];
        }
        squared_dt_1d(&line[..nz], spacing[2], &mut out[..nz], &mut v, &mut z);
        for k in 0..nz {
            d[base + plane * k] = out[k];
        }
    }
    d.iter_mut().for_each(|x| *x = sqrt(*x));
    d
}
