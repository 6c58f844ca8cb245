//! Discrete fractional Fourier transform and chirp excision.
//!
//! The transform is `F_a = U diag(exp(-j pi/2 * k * a)) U^T`, where the
//! columns of `U` are real orthonormal eigenvectors of the DFT-commuting
//! matrix
//!
//! ```text
//! S[n, n]   = 2 cos(2 pi n / N) - 4
//! S[n, n±1] = 1        (indices mod N)
//! ```
//!
//! and `k` is the Hermite order of each eigenvector. `S` commutes with the
//! reflection `n -> N - n`, so it splits into an even block of size
//! `floor(N/2) + 1` and an odd block of size `ceil(N/2) - 1`, both
//! unreduced tridiagonal (hence with distinct eigenvalues). Sorting each
//! block's eigenvalues in decreasing order assigns orders `0, 2, 4, ...`
//! and `1, 3, 5, ...`; for even `N` the order `N - 1` has no eigenvector
//! and `N` takes its place. With this assignment `F_1` is exactly the
//! unitary DFT.
//!
//! The basis is rotated by `N/2` samples so that the transform is centered:
//! `F_1` maps a block whose time origin sits at index `N/2` to a spectrum
//! whose zero frequency sits at index `N/2`.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::sigsim::ComplexSignal;
use crate::{Error, Result};

/// Precomputed eigenbasis for one transform size. Immutable and shareable.
#[derive(Debug, Clone)]
pub struct FrftPlan {
    size: usize,
    /// Columns are eigenvectors in centered sample order.
    basis: DMatrix<f64>,
    basis_t: DMatrix<f64>,
    /// Hermite order of each column.
    orders: Vec<f64>,
}

impl FrftPlan {
    pub fn new(size: usize) -> Result<Self> {
        if size < 2 {
            return Err(Error::Parameter(format!("FRFT size {size} must be at least 2")));
        }
        let n = size;
        let half = n / 2;
        // Even basis: delta_0, (delta_k + delta_{N-k})/sqrt2, and delta_{N/2} for even N.
        let mut even: Vec<Vec<(usize, f64)>> = vec![vec![(0, 1.0)]];
        let mut odd: Vec<Vec<(usize, f64)>> = Vec::new();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let paired_max = if n.is_multiple_of(2) { half - 1 } else { half };
        for k in 1..=paired_max {
            even.push(vec![(k, s), (n - k, s)]);
            odd.push(vec![(k, s), (n - k, -s)]);
        }
        if n.is_multiple_of(2) {
            even.push(vec![(half, 1.0)]);
        }

        let mut basis = DMatrix::<f64>::zeros(n, n);
        let mut orders = Vec::with_capacity(n);
        let mut col = 0;
        for (vectors, first_order) in [(&even, 0usize), (&odd, 1usize)] {
            if vectors.is_empty() {
                continue;
            }
            let m = vectors.len();
            let block = project_commuting_matrix(n, vectors);
            let eig = SymmetricEigen::new(block);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
            for (rank, &i) in idx.iter().enumerate() {
                let coeffs = eig.eigenvectors.column(i);
                for (b, support) in vectors.iter().enumerate() {
                    for &(pos, w) in support {
                        // Centered row for uncentered position `pos`.
                        let row = (pos + half) % n;
                        basis[(row, col)] += coeffs[b] * w;
                    }
                }
                orders.push((first_order + 2 * rank) as f64);
                col += 1;
            }
        }
        debug_assert_eq!(col, n);
        let basis_t = basis.transpose();
        Ok(Self { size, basis, basis_t, orders })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Hermite order assigned to each eigenvector.
    pub fn orders(&self) -> &[f64] {
        &self.orders
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Eigen-domain coefficients `U^T X` for the columns of `X`, as
    /// (real, imaginary) matrices.
    fn analyze(&self, re: &DMatrix<f64>, im: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (&self.basis_t * re, &self.basis_t * im)
    }

    /// Applies the fractional powers for `order_a` to eigen-domain
    /// coefficients in place.
    fn rotate(&self, re: &mut DMatrix<f64>, im: &mut DMatrix<f64>, order_a: f64) {
        for (k, &order) in self.orders.iter().enumerate() {
            let (sin, cos) = (-FRAC_PI_2 * order * order_a).sin_cos();
            for c in 0..re.ncols() {
                let (r, i) = (re[(k, c)], im[(k, c)]);
                re[(k, c)] = r * cos - i * sin;
                im[(k, c)] = r * sin + i * cos;
            }
        }
    }

    fn synthesize(&self, re: &DMatrix<f64>, im: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
        (&self.basis * re, &self.basis * im)
    }

    /// Transforms each column of a block matrix.
    pub fn transform_columns(&self, blocks: &[Vec<Complex64>], order_a: f64) -> Vec<Vec<Complex64>> {
        let (re, im) = to_matrices(blocks, self.size);
        let (mut cr, mut ci) = self.analyze(&re, &im);
        self.rotate(&mut cr, &mut ci, order_a);
        let (yr, yi) = self.synthesize(&cr, &ci);
        from_matrices(&yr, &yi)
    }

    /// `F_a x` for a single block of exactly `size` samples.
    pub fn transform(&self, x: &[Complex64], order_a: f64) -> Result<Vec<Complex64>> {
        if x.len() != self.size {
            return Err(Error::Dimension(format!(
                "FRFT plan size {} does not match input length {}",
                self.size,
                x.len()
            )));
        }
        Ok(self.transform_columns(&[x.to_vec()], order_a).remove(0))
    }
}

/// Even or odd block of `S` in the given orthonormal basis.
fn project_commuting_matrix(n: usize, vectors: &[Vec<(usize, f64)>]) -> DMatrix<f64> {
    let m = vectors.len();
    // Which basis vector (and weight) touches each sample position.
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; n];
    for (b, support) in vectors.iter().enumerate() {
        for &(pos, w) in support {
            owner[pos] = Some((b, w));
        }
    }
    let diag = |p: usize| 2.0 * (2.0 * std::f64::consts::PI * p as f64 / n as f64).cos() - 4.0;
    let mut block = DMatrix::<f64>::zeros(m, m);
    for (j, support) in vectors.iter().enumerate() {
        // S e_j accumulated sparsely.
        let mut image: Vec<(usize, f64)> = Vec::with_capacity(6);
        for &(pos, w) in support {
            image.push((pos, w * diag(pos)));
            image.push(((pos + 1) % n, w));
            image.push(((pos + n - 1) % n, w));
        }
        for (pos, v) in image {
            if let Some((i, w)) = owner[pos] {
                block[(i, j)] += w * v;
            }
        }
    }
    block
}

fn to_matrices(blocks: &[Vec<Complex64>], n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let b = blocks.len();
    let mut re = DMatrix::<f64>::zeros(n, b);
    let mut im = DMatrix::<f64>::zeros(n, b);
    for (c, block) in blocks.iter().enumerate() {
        for (r, v) in block.iter().enumerate() {
            re[(r, c)] = v.re;
            im[(r, c)] = v.im;
        }
    }
    (re, im)
}

fn from_matrices(re: &DMatrix<f64>, im: &DMatrix<f64>) -> Vec<Vec<Complex64>> {
    (0..re.ncols())
        .map(|c| re.column(c).iter().zip(im.column(c).iter()).map(|(&r, &i)| Complex64::new(r, i)).collect())
        .collect()
}

/// `X_a = F_a x` for a whole signal whose length equals the plan size.
pub fn frft(sig: &ComplexSignal, order_a: f64, plan: &FrftPlan) -> Result<ComplexSignal> {
    let out = plan.transform(sig.samples(), order_a)?;
    sig.with_samples(out)
}

/// Parameters of the rotation search and excision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrftSearch {
    pub block_size: usize,
    /// Orders searched are `0, step, 2*step, ...` below 2.
    pub grid_step: f64,
    /// Peak-to-mean ratio of `|F_a x|^2` that counts as a detection.
    pub peak_threshold: f64,
    /// Bins nulled on each side of a detected peak.
    pub null_halfwidth: usize,
    /// Peaks nulled per block at most.
    pub max_peaks: usize,
    /// A null keeps widening while the next bin exceeds this multiple of
    /// the block's median bin power, so leakage skirts go with the peak.
    pub skirt_factor: f64,
    /// Highest-energy blocks used to pick the rotation order.
    pub probe_blocks: usize,
    /// Sine-windowed blocks at half overlap instead of disjoint
    /// rectangular blocks. The taper keeps leakage of a focused peak out
    /// of distant bins.
    pub windowed: bool,
}

impl Default for FrftSearch {
    fn default() -> Self {
        Self {
            block_size: 256,
            grid_step: 0.01,
            peak_threshold: 20.0,
            null_halfwidth: 2,
            max_peaks: 3,
            skirt_factor: 8.0,
            windowed: true,
            probe_blocks: 4,
        }
    }
}

impl FrftSearch {
    pub fn grid(&self) -> Vec<f64> {
        let steps = (2.0 / self.grid_step).round() as usize;
        (0..steps).map(|i| i as f64 * self.grid_step).collect()
    }
}

/// Outcome of the order search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationPeak {
    pub order_a: f64,
    pub peak_to_mean: f64,
}

/// Finds the grid order whose transform of any of the given blocks has
/// the largest peak-to-mean ratio. Ties keep the smallest order.
pub fn search_rotation(plan: &FrftPlan, blocks: &[Vec<Complex64>], grid: &[f64]) -> RotationPeak {
    let mut best = RotationPeak { order_a: 0.0, peak_to_mean: 0.0 };
    for block in blocks {
        let energy: f64 = block.iter().map(|v| v.norm_sqr()).sum();
        if energy <= 0.0 {
            continue;
        }
        let (re, im) = to_matrices(std::slice::from_ref(block), plan.size);
        let (cr, ci) = plan.analyze(&re, &im);
        // One column per grid order.
        let g = grid.len();
        let mut dr = DMatrix::<f64>::zeros(plan.size, g);
        let mut di = DMatrix::<f64>::zeros(plan.size, g);
        for (c, &a) in grid.iter().enumerate() {
            for (k, &order) in plan.orders.iter().enumerate() {
                let (sin, cos) = (-FRAC_PI_2 * order * a).sin_cos();
                let (r, i) = (cr[(k, 0)], ci[(k, 0)]);
                dr[(k, c)] = r * cos - i * sin;
                di[(k, c)] = r * sin + i * cos;
            }
        }
        let (yr, yi) = plan.synthesize(&dr, &di);
        let mean = energy / plan.size as f64;
        for (c, &a) in grid.iter().enumerate() {
            let peak = yr.column(c).iter().zip(yi.column(c).iter()).map(|(r, i)| r * r + i * i).fold(0.0, f64::max);
            let pmr = peak / mean;
            if pmr > best.peak_to_mean {
                best = RotationPeak { order_a: a, peak_to_mean: pmr };
            }
        }
    }
    best
}

/// Excises chirp- and tone-like interference by nulling peaks in the
/// fractional Fourier domain.
///
/// The rotation order is searched on the highest-energy blocks and shared
/// by all blocks (a linear chirp keeps one rate throughout). Each block is
/// then rotated, its peaks above the threshold are nulled, and the
/// residual is rotated back. With no detection the input is returned
/// unchanged.
pub fn frft_mitigate(sig: &ComplexSignal, plan: &FrftPlan, search: &FrftSearch) -> Result<ComplexSignal> {
    let n = plan.size();
    if search.block_size != n {
        return Err(Error::Dimension(format!("search block size {} does not match plan size {n}", search.block_size)));
    }
    let x = sig.samples();
    let zero = Complex64::new(0.0, 0.0);
    // Windowed frames overlap by half so the squared sine windows sum to one.
    let (hop, front, window): (usize, usize, Vec<f64>) = if search.windowed {
        let w = (0..n).map(|i| (PI * (i as f64 + 0.5) / n as f64).sin()).collect();
        (n / 2, n / 2, w)
    } else {
        (n, 0, vec![1.0; n])
    };
    let covered = front + x.len() + front;
    let padded_len = n.max(covered) + (hop - (n.max(covered) - n) % hop) % hop;
    let mut padded = vec![zero; padded_len];
    padded[front..front + x.len()].copy_from_slice(x);
    let starts: Vec<usize> = (0..=(padded_len - n) / hop).map(|f| f * hop).collect();
    let blocks: Vec<Vec<Complex64>> =
        starts.iter().map(|&s| padded[s..s + n].iter().zip(&window).map(|(v, w)| v * w).collect()).collect();
    let energies: Vec<f64> = blocks.iter().map(|b| b.iter().map(|v| v.norm_sqr()).sum()).collect();

    let mut order: Vec<usize> = (0..blocks.len()).collect();
    order.sort_by(|&i, &j| energies[j].total_cmp(&energies[i]).then(i.cmp(&j)));
    let probes: Vec<Vec<Complex64>> =
        order.iter().take(search.probe_blocks.max(1)).map(|&i| blocks[i].clone()).collect();
    let best = search_rotation(plan, &probes, &search.grid());
    if best.peak_to_mean < search.peak_threshold {
        return Ok(sig.clone());
    }

    let spectra = plan.transform_columns(&blocks, best.order_a);
    let mut nulled: Vec<Vec<Complex64>> = Vec::new();
    let mut touched: Vec<usize> = Vec::new();
    for (b, spec) in spectra.iter().enumerate() {
        let mean = energies[b] / n as f64;
        if mean <= 0.0 {
            continue;
        }
        let power: Vec<f64> = spec.iter().map(|v| v.norm_sqr()).collect();
        let skirt = {
            let mut sorted = power.clone();
            let (_, median, _) = sorted.select_nth_unstable_by(n / 2, f64::total_cmp);
            *median * search.skirt_factor
        };
        let mut mask = vec![false; n];
        let mut removed = vec![Complex64::new(0.0, 0.0); n];
        let mut any = false;
        for _ in 0..search.max_peaks {
            let (peak_idx, peak) = spec
                .iter()
                .enumerate()
                .filter(|(i, _)| !mask[*i])
                .map(|(i, v)| (i, v.norm_sqr()))
                .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
            if peak / mean < search.peak_threshold {
                break;
            }
            any = true;
            let w = search.null_halfwidth as isize;
            let wrap = |d: isize| (peak_idx as isize + d).rem_euclid(n as isize) as usize;
            let mut lo = -w;
            while lo > -(n as isize) / 2 && power[wrap(lo - 1)] > skirt {
                lo -= 1;
            }
            let mut hi = w;
            while hi < n as isize / 2 - 1 && power[wrap(hi + 1)] > skirt {
                hi += 1;
            }
            for d in lo..=hi {
                let i = wrap(d);
                if !mask[i] {
                    mask[i] = true;
                    removed[i] = spec[i];
                }
            }
        }
        if any {
            nulled.push(removed);
            touched.push(b);
        }
    }
    if touched.is_empty() {
        return Ok(sig.clone());
    }
    // x - F_a^H (removed part) == F_{-a} (nulled spectrum).
    let back = plan.transform_columns(&nulled, -best.order_a);
    for (b, residual) in touched.into_iter().zip(back) {
        for ((v, r), w) in padded[starts[b]..starts[b] + n].iter_mut().zip(residual).zip(&window) {
            *v -= r * w;
        }
    }
    sig.with_samples(padded[front..front + x.len()].to_vec())
}
