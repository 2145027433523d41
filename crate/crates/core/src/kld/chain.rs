//! Log-barrier Newton solver for concave programs on a chain.
//!
//! The variables `z_1 < ... < z_K` sit between optional fixed anchors `z_0`
//! and `z_{K+1}`. Consecutive points are joined by links that either carry
//! an objective term `w * ln(z_{k+1} - z_k)` or a plain ordering constraint,
//! and each variable may have a lower and an upper bound. Every term touches
//! at most two neighbouring variables, so the Newton system is tridiagonal.
//!
//! After the barrier phase the active set is read off the solution and the
//! exact optimum for that active set is reconstructed; it replaces the
//! barrier iterate only when it is primal and dual feasible.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Link {
    Objective(f64),
    Order,
    Free,
}

#[derive(Debug, Clone)]
pub(crate) struct ChainProgram {
    pub left_anchor: Option<f64>,
    pub right_anchor: Option<f64>,
    /// `links[k]` joins point `k` and point `k + 1`; point 0 and point
    /// `K + 1` are the anchors. Length `K + 1`.
    pub links: Vec<Link>,
    pub lower: Vec<Option<f64>>,
    pub upper: Vec<Option<f64>>,
}

#[derive(Debug, Clone)]
pub(crate) struct ChainSolution {
    pub z: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SolverOptions {
    pub gap_tol: f64,
    pub t0: f64,
    pub growth: f64,
    pub newton_tol: f64,
    pub max_newton: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { gap_tol: 1e-10, t0: 1.0, growth: 16.0, newton_tol: 1e-12, max_newton: 4000 }
    }
}

const ACTIVE_TOL: f64 = 1e-8;
const FEAS_TOL: f64 = 1e-13;

impl ChainProgram {
    fn k(&self) -> usize {
        self.lower.len()
    }

    fn point(&self, z: &[f64], p: usize) -> Option<f64> {
        let k = self.k();
        if p == 0 {
            self.left_anchor
        } else if p == k + 1 {
            self.right_anchor
        } else {
            Some(z[p - 1])
        }
    }

    fn barrier_count(&self) -> usize {
        self.links.iter().filter(|l| matches!(l, Link::Order)).count()
            + self.lower.iter().flatten().count()
            + self.upper.iter().flatten().count()
    }

    /// Maximized objective `sum w ln d`, or `-inf` off the domain.
    pub fn objective(&self, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, link) in self.links.iter().enumerate() {
            if let Link::Objective(w) = link {
                let d = self.point(z, k + 1).unwrap() - self.point(z, k).unwrap();
                if d <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                s += w * d.ln();
            }
        }
        s
    }

    fn barrier(&self, t: f64, z: &[f64]) -> f64 {
        let mut s = 0.0;
        for (k, link) in self.links.iter().enumerate() {
            let c = match link {
                Link::Objective(w) => t * w,
                Link::Order => 1.0,
                Link::Free => continue,
            };
            let d = self.point(z, k + 1).unwrap() - self.point(z, k).unwrap();
            if d <= 0.0 {
                return f64::INFINITY;
            }
            s -= c * d.ln();
        }
        for (v, &zv) in z.iter().enumerate() {
            if let Some(l) = self.lower[v] {
                let d = zv - l;
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                s -= d.ln();
            }
            if let Some(u) = self.upper[v] {
                let d = u - zv;
                if d <= 0.0 {
                    return f64::INFINITY;
                }
                s -= d.ln();
            }
        }
        s
    }

    /// Gradient and tridiagonal Hessian (`diag`, `off[v]` couples `v, v+1`).
    fn derivatives(&self, t: f64, z: &[f64], g: &mut [f64], diag: &mut [f64], off: &mut [f64]) {
        let k = self.k();
        g.fill(0.0);
        diag.fill(0.0);
        off.fill(0.0);
        for (p, link) in self.links.iter().enumerate() {
            let c = match link {
                Link::Objective(w) => t * w,
                Link::Order => 1.0,
                Link::Free => continue,
            };
            let d = self.point(z, p + 1).unwrap() - self.point(z, p).unwrap();
            let gd = c / d;
            let h = gd / d;
            // point p is variable p-1, point p+1 is variable p
            let left = (p >= 1).then(|| p - 1);
            let right = (p < k).then_some(p);
            if let Some(v) = left {
                g[v] += gd;
                diag[v] += h;
            }
            if let Some(v) = right {
                g[v] -= gd;
                diag[v] += h;
            }
            if let (Some(l), Some(_)) = (left, right) {
                off[l] -= h;
            }
        }
        for v in 0..k {
            if let Some(l) = self.lower[v] {
                let d = z[v] - l;
                g[v] -= 1.0 / d;
                diag[v] += 1.0 / (d * d);
            }
            if let Some(u) = self.upper[v] {
                let d = u - z[v];
                g[v] += 1.0 / d;
                diag[v] += 1.0 / (d * d);
            }
        }
    }

    /// Largest step keeping every linear term strictly positive.
    fn max_step(&self, z: &[f64], dz: &[f64]) -> f64 {
        let k = self.k();
        let mut s = f64::INFINITY;
        let dir = |p: usize| if p == 0 || p == k + 1 { 0.0 } else { dz[p - 1] };
        for (p, link) in self.links.iter().enumerate() {
            if matches!(link, Link::Free) {
                continue;
            }
            let d = self.point(z, p + 1).unwrap() - self.point(z, p).unwrap();
            let dd = dir(p + 1) - dir(p);
            if dd < 0.0 {
                s = s.min(-d / dd);
            }
        }
        for v in 0..k {
            if let Some(l) = self.lower[v] {
                if dz[v] < 0.0 {
                    s = s.min((z[v] - l) / -dz[v]);
                }
            }
            if let Some(u) = self.upper[v] {
                if dz[v] > 0.0 {
                    s = s.min((u - z[v]) / dz[v]);
                }
            }
        }
        s
    }

    /// Strictly feasible starting point.
    fn initial_point(&self) -> Vec<f64> {
        let k = self.k();
        let mut lo = vec![f64::NEG_INFINITY; k];
        let mut hi = vec![f64::INFINITY; k];
        let mut run = self.left_anchor.unwrap_or(f64::NEG_INFINITY);
        for v in 0..k {
            if let Some(l) = self.lower[v] {
                run = run.max(l);
            }
            lo[v] = run;
        }
        let mut run = self.right_anchor.unwrap_or(f64::INFINITY);
        for v in (0..k).rev() {
            if let Some(u) = self.upper[v] {
                run = run.min(u);
            }
            hi[v] = run;
        }
        (0..k)
            .map(|v| {
                let s = (v + 1) as f64 / (k + 1) as f64;
                match (lo[v].is_finite(), hi[v].is_finite()) {
                    (true, true) => (1.0 - s) * lo[v] + s * hi[v],
                    (true, false) => lo[v] + 1.0 + v as f64,
                    (false, true) => hi[v] - (k - v) as f64,
                    (false, false) => v as f64,
                }
            })
            .collect()
    }

    pub fn solve(&self, opts: &SolverOptions) -> ChainSolution {
        let k = self.k();
        let mut z = self.initial_point();
        let m = self.barrier_count().max(1) as f64;
        let mut g = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut off = vec![0.0; k.saturating_sub(1)];
        let mut dz = vec![0.0; k];
        let mut trial = vec![0.0; k];
        let mut t = opts.t0;
        let mut iterations = 0usize;
        let mut capped = false;

        loop {
            // Centering.
            loop {
                if iterations >= opts.max_newton {
                    capped = true;
                    break;
                }
                self.derivatives(t, &z, &mut g, &mut diag, &mut off);
                solve_tridiagonal(&diag, &off, &g, &mut dz);
                dz.iter_mut().for_each(|d| *d = -*d);
                let slope: f64 = g.iter().zip(&dz).map(|(a, b)| a * b).sum();
                if -slope * 0.5 <= opts.newton_tol || !slope.is_finite() {
                    break;
                }
                iterations += 1;
                let mut step = (0.99 * self.max_step(&z, &dz)).min(1.0);
                let f0 = self.barrier(t, &z);
                let mut accepted = None;
                while step > 1e-14 {
                    for v in 0..k {
                        trial[v] = z[v] + step * dz[v];
                    }
                    let f1 = self.barrier(t, &trial);
                    if f1 <= f0 + 0.01 * step * slope {
                        accepted = Some(f1);
                        break;
                    }
                    step *= 0.5;
                }
                let Some(f1) = accepted else { break };
                std::mem::swap(&mut z, &mut trial);
                // Rounding floor: the barrier no longer moves measurably.
                if f0 - f1 <= 4.0 * f64::EPSILON * f0.abs().max(1.0) {
                    break;
                }
            }
            if capped || m / t <= opts.gap_tol {
                break;
            }
            t *= opts.growth;
        }

        // Residual of the barrier's stationarity condition in objective units.
        self.derivatives(t, &z, &mut g, &mut diag, &mut off);
        let barrier_residual = g.iter().fold(0.0f64, |a, b| a.max(b.abs())) / t;
        let converged = !capped;

        match self.polish(&z) {
            Some((zp, residual)) if self.objective(&zp) >= self.objective(&z) - 1e-12 => {
                ChainSolution { z: zp, iterations, converged, kkt_residual: residual }
            }
            _ => ChainSolution { z, iterations, converged, kkt_residual: barrier_residual },
        }
    }

    /// Exact optimum for the active set read off `z`, with its worst dual
    /// violation, or `None` if that active set is not optimal.
    fn polish(&self, z: &[f64]) -> Option<(Vec<f64>, f64)> {
        let k = self.k();
        let mut lower_active = vec![false; k];
        let mut upper_active = vec![false; k];
        let mut pinned: Vec<Option<f64>> = vec![None; k + 2];
        pinned[0] = self.left_anchor;
        pinned[k + 1] = self.right_anchor;
        for v in 0..k {
            let ls = self.lower[v].map(|l| z[v] - l);
            let us = self.upper[v].map(|u| u - z[v]);
            lower_active[v] = ls.is_some_and(|s| s <= ACTIVE_TOL);
            upper_active[v] = us.is_some_and(|s| s <= ACTIVE_TOL);
            pinned[v + 1] = match (lower_active[v], upper_active[v]) {
                (true, true) if us < ls => self.upper[v],
                (true, _) => self.lower[v],
                (false, true) => self.upper[v],
                _ => None,
            };
        }
        let pins: Vec<usize> = (0..k + 2).filter(|&p| pinned[p].is_some()).collect();
        // Links outside the outermost pins must be Free and carry no variables.
        let first = *pins.first()?;
        let last = *pins.last()?;
        if first != 0 || last != k + 1 {
            let left_ok = (0..first).all(|p| matches!(self.links[p], Link::Free)) && first <= 1;
            let right_ok = (last..k + 1).all(|p| matches!(self.links[p], Link::Free)) && last >= k;
            if !left_ok || !right_ok {
                return None;
            }
        }

        let mut out = z.to_vec();
        // (price, blocked) for the segment ending / starting at each pin.
        let mut seg_left: Vec<(f64, bool)> = vec![(0.0, false); k + 2];
        let mut seg_right: Vec<(f64, bool)> = vec![(0.0, false); k + 2];
        for w in pins.windows(2) {
            let (i, j) = (w[0], w[1]);
            let (pv, qv) = (pinned[i].unwrap(), pinned[j].unwrap());
            let span = qv - pv;
            let mut total = 0.0;
            for p in i..j {
                match self.links[p] {
                    Link::Objective(w) => total += w,
                    Link::Order => {}
                    Link::Free => return None,
                }
            }
            if total == 0.0 {
                if span < -FEAS_TOL {
                    return None;
                }
                for p in i + 1..j {
                    out[p - 1] = out[p - 1].clamp(pv, qv.max(pv));
                }
                let blocked = span <= ACTIVE_TOL;
                seg_right[i] = (0.0, blocked);
                seg_left[j] = (0.0, blocked);
                continue;
            }
            if span <= 0.0 {
                return None;
            }
            let mut cur = pv;
            for p in i..j {
                match self.links[p] {
                    Link::Objective(w) => cur += w / total * span,
                    Link::Order => {
                        let d = self.point(z, p + 1).unwrap() - self.point(z, p).unwrap();
                        if d > ACTIVE_TOL {
                            return None;
                        }
                    }
                    Link::Free => unreachable!(),
                }
                if p + 1 < j {
                    out[p] = cur;
                }
            }
            let price = total / span;
            seg_right[i] = (price, false);
            seg_left[j] = (price, false);
        }

        // Dual feasibility at pinned variables.
        let mut worst = 0.0f64;
        for &p in &pins {
            if p == 0 || p == k + 1 {
                continue;
            }
            let v = p - 1;
            out[v] = pinned[p].unwrap();
            let (pl, left_blocked) = seg_left[p];
            let (pr, right_blocked) = seg_right[p];
            let grad = pl - pr;
            let scale = pl.abs() + pr.abs() + 1.0;
            let up_blocked = upper_active[v] || right_blocked;
            let down_blocked = lower_active[v] || left_blocked;
            let viol = if grad > 0.0 && !up_blocked {
                grad
            } else if grad < 0.0 && !down_blocked {
                -grad
            } else {
                0.0
            };
            worst = worst.max(viol / scale);
        }
        if worst > 1e-9 {
            return None;
        }
        if !self.feasible(&out) {
            return None;
        }
        Some((out, worst))
    }

    pub fn feasible(&self, z: &[f64]) -> bool {
        for (p, link) in self.links.iter().enumerate() {
            if matches!(link, Link::Free) {
                continue;
            }
            let d = self.point(z, p + 1).unwrap() - self.point(z, p).unwrap();
            let ok = match link {
                Link::Objective(_) => d > 0.0,
                _ => d >= -FEAS_TOL,
            };
            if !ok {
                return false;
            }
        }
        (0..self.k()).all(|v| {
            self.lower[v].is_none_or(|l| z[v] >= l - FEAS_TOL) && self.upper[v].is_none_or(|u| z[v] <= u + FEAS_TOL)
        })
    }
}

/// Solves the symmetric tridiagonal system `H x = rhs` by LDL^T.
fn solve_tridiagonal(diag: &[f64], off: &[f64], rhs: &[f64], x: &mut [f64]) {
    let n = diag.len();
    if n == 0 {
        return;
    }
    let mut d = vec![0.0; n];
    let mut l = vec![0.0; n.saturating_sub(1)];
    d[0] = diag[0];
    for i in 1..n {
        l[i - 1] = off[i - 1] / d[i - 1];
        d[i] = diag[i] - l[i - 1] * off[i - 1];
    }
    x[0] = rhs[0];
    for i in 1..n {
        x[i] = rhs[i] - l[i - 1] * x[i - 1];
    }
    for i in 0..n {
        x[i] /= d[i];
    }
    for i in (0..n - 1).rev() {
        x[i] -= l[i] * x[i + 1];
    }
}
