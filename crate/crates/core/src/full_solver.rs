//! Transient solver for the transformed eps-parameterized Biot problem:
//! an initial elasticity solve followed by monolithic backward-Euler steps
//! with one sparse factorization reused across the time loop, plus an
//! independent Schur-complement path that eliminates the displacement and
//! advances the reduced pressure ODE system.

use crate::assembly::{
    add_biot_coupling, add_darcy_stiffness, add_elasticity, add_flow_load, add_mech_load,
    add_storage_mass, Prefactor,
};
use crate::exponents::{validate_exponents, ScalingExponents};
use crate::geometry::Geometry;
use crate::linalg::{dense_factorize, SkylineMatrix};
use crate::materials::MaterialFields;
use crate::mesh::FracturedMesh;
use crate::spaces::{build_space, SpaceDescriptor, SpaceKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonTag {
    Value(f64),
    Limit,
}

impl EpsilonTag {
    pub fn label(&self) -> String {
        match self {
            EpsilonTag::Value(e) => format!("{e:.16e}"),
            EpsilonTag::Limit => "limit".into(),
        }
    }
}

/// Time series of pressure and displacement coefficients.
#[derive(Debug, Clone)]
pub struct TransientSolution {
    pub times: Vec<f64>,
    pub p_coeffs: Vec<Vec<f64>>,
    pub u_coeffs: Vec<Vec<f64>>,
    pub p_space: SpaceDescriptor,
    pub u_space: SpaceDescriptor,
    pub epsilon: EpsilonTag,
}

impl TransientSolution {
    /// One CSV per time level: vertex id, subdomain, x, y, p, u_x, u_y.
    pub fn level_csv(&self, mesh: &FracturedMesh, level: usize) -> String {
        let p = &self.p_coeffs[level];
        let u = &self.u_coeffs[level];
        let mut out = String::from("vertex,subdomain,x,y,p,u_x,u_y\n");
        for v in 0..mesh.n_vertices() {
            let pos = mesh.vertices[v];
            let pv = self.p_space.dof(v, 0).map(|d| p[d]).unwrap_or(f64::NAN);
            let ux = self.u_space.dof(v, 0).map(|d| u[d]).unwrap_or(f64::NAN);
            let uy = self.u_space.dof(v, 1).map(|d| u[d]).unwrap_or(f64::NAN);
            out.push_str(&format!(
                "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
                v,
                mesh.vertex_region[v].label(),
                pos[0],
                pos[1],
                pv,
                ux,
                uy
            ));
        }
        out
    }
}

/// Run configuration of the full eps-problem.
#[derive(Debug, Clone)]
pub struct BiotRunConfig {
    pub geometry: Geometry,
    pub exponents: ScalingExponents,
    pub epsilon: f64,
    pub materials: MaterialFields,
    pub t_end: f64,
    pub dt: f64,
    pub solver_tol: f64,
    pub schur_dof_cap: usize,
    /// multiplies the fracture flow source by eps^(-p); nonzero values model
    /// inadmissible data for the a priori counterexample
    pub frac_source_eps_power: f64,
}

impl BiotRunConfig {
    pub fn new(geometry: Geometry, exponents: ScalingExponents, epsilon: f64) -> Self {
        BiotRunConfig {
            geometry,
            exponents,
            epsilon,
            materials: MaterialFields::default_study(),
            t_end: 0.5,
            dt: 1.0 / 40.0,
            solver_tol: 1e-10,
            schur_dof_cap: 4000,
            frac_source_eps_power: 0.0,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_end >= self.dt) {
            return Err(Error::Solver("need dt > 0 and t_end >= dt".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::Solver("epsilon must lie in (0, 1]".into()));
        }
        Ok(())
    }

    fn frac_extra(&self) -> f64 {
        self.epsilon.powf(-self.frac_source_eps_power)
    }
}

/// Assembled time-independent operators of the full problem.
pub struct FullOperators {
    pub u_space: SpaceDescriptor,
    pub p_space: SpaceDescriptor,
    pub a: Vec<(usize, usize, f64)>,
    pub b: Vec<(usize, usize, f64)>,
    pub c: Vec<(usize, usize, f64)>,
    pub d: Vec<(usize, usize, f64)>,
    pre: Prefactor,
}

impl FullOperators {
    pub fn build(mesh: &FracturedMesh, cfg: &BiotRunConfig) -> Result<Self> {
        cfg.check()?;
        validate_exponents(&cfg.exponents, &mesh.geometry)?;
        cfg.materials.validate(mesh)?;
        let u_space = build_space(mesh, SpaceKind::VFull)?;
        let p_space = build_space(mesh, SpaceKind::PhiFull)?;
        let pre = Prefactor::Full {
            eps: cfg.epsilon,
            exponents: cfg.exponents,
        };
        let mut a = Vec::new();
        let mut b = Vec::new();
        let mut c = Vec::new();
        let mut d = Vec::new();
        add_elasticity(&mut a, mesh, &cfg.materials, &pre, &u_space);
        add_biot_coupling(&mut b, mesh, &cfg.materials, &pre, &p_space, &u_space);
        add_storage_mass(&mut c, mesh, &cfg.materials, &pre, &p_space);
        add_darcy_stiffness(&mut d, mesh, &cfg.materials, &pre, &p_space);
        Ok(FullOperators {
            u_space,
            p_space,
            a,
            b,
            c,
            d,
            pre,
        })
    }

    pub fn n_u(&self) -> usize {
        self.u_space.n_dofs
    }
    pub fn n_p(&self) -> usize {
        self.p_space.n_dofs
    }

    pub fn mech_load(&self, mesh: &FracturedMesh, cfg: &BiotRunConfig, t: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n_u()];
        add_mech_load(&mut rhs, mesh, &cfg.materials, &self.pre, &self.u_space, t);
        rhs
    }

    pub fn flow_load(&self, mesh: &FracturedMesh, cfg: &BiotRunConfig, t: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.n_p()];
        add_flow_load(
            &mut rhs,
            mesh,
            &cfg.materials,
            &self.pre,
            &self.p_space,
            t,
            cfg.frac_extra(),
        );
        rhs
    }

    /// Nodal interpolant of the initial pressure head, zeroed on Dirichlet dofs.
    pub fn initial_pressure(&self, mesh: &FracturedMesh, cfg: &BiotRunConfig) -> Vec<f64> {
        let mut p0 = vec![0.0; self.n_p()];
        for v in 0..mesh.n_vertices() {
            if let Some(d) = self.p_space.dof(v, 0) {
                let (r, pt) = mesh.logical_coords(v);
                p0[d] = cfg.materials.initial_pressure(r).eval(pt, 0.0);
            }
        }
        for d in 0..self.n_p() {
            if self.p_space.dirichlet[d] {
                p0[d] = 0.0;
            }
        }
        p0
    }

    /// Discrete energy 1/2 A(u,u) + 1/2 C(p,p).
    pub fn energy(&self, u: &[f64], p: &[f64]) -> f64 {
        let mut e = 0.0;
        for &(i, j, v) in &self.a {
            e += 0.5 * u[i] * v * u[j];
        }
        for &(i, j, v) in &self.c {
            e += 0.5 * p[i] * v * p[j];
        }
        e
    }
}

fn tri_matvec(t: &[(usize, usize, f64)], x: &[f64], out: &mut [f64]) {
    for &(i, j, v) in t {
        out[i] += v * x[j];
    }
}

fn tri_matvec_t(t: &[(usize, usize, f64)], x: &[f64], out: &mut [f64]) {
    for &(i, j, v) in t {
        out[j] += v * x[i];
    }
}

/// Monolithic backward-Euler stepper with the factorized step matrix.
pub struct Stepper<'m> {
    pub mesh: &'m FracturedMesh,
    pub cfg: BiotRunConfig,
    pub ops: FullOperators,
    factor: crate::linalg::SkylineFactor,
    constrained: Vec<bool>,
}

impl<'m> Stepper<'m> {
    pub fn new(mesh: &'m FracturedMesh, cfg: BiotRunConfig) -> Result<Self> {
        let ops = FullOperators::build(mesh, &cfg)?;
        let n_u = ops.n_u();
        let n = n_u + ops.n_p();
        let dt = cfg.dt;
        let mut constrained = vec![false; n];
        for d in 0..n_u {
            constrained[d] = ops.u_space.dirichlet[d];
        }
        for d in 0..ops.n_p() {
            constrained[n_u + d] = ops.p_space.dirichlet[d];
        }
        // step matrix [[A, -B], [-B^t, -(C + dt D)]], flow row negated so the
        // system is symmetric quasi-definite
        let mut trips: Vec<(usize, usize, f64)> =
            Vec::with_capacity(ops.a.len() + 2 * ops.b.len() + ops.c.len() + ops.d.len() + n);
        let mut push = |i: usize, j: usize, v: f64| {
            if !constrained[i] && !constrained[j] {
                trips.push((i, j, v));
            }
        };
        for &(i, j, v) in &ops.a {
            push(i, j, v);
        }
        for &(i, j, v) in &ops.b {
            push(i, n_u + j, -v);
            push(n_u + j, i, -v);
        }
        for &(i, j, v) in &ops.c {
            push(n_u + i, n_u + j, -v);
        }
        for &(i, j, v) in &ops.d {
            push(n_u + i, n_u + j, -dt * v);
        }
        for d in 0..n {
            if constrained[d] {
                trips.push((d, d, 1.0));
            }
        }
        let factor = SkylineMatrix::from_triplets(n, &trips).factorize()?;
        Ok(Stepper {
            mesh,
            cfg,
            ops,
            factor,
            constrained,
        })
    }

    /// Initial displacement: A u0 = L(0) + B p0 on the free dofs.
    pub fn solve_initial_displacement(&self, p0: &[f64]) -> Result<Vec<f64>> {
        let n_u = self.ops.n_u();
        let mut rhs = self.ops.mech_load(self.mesh, &self.cfg, 0.0);
        tri_matvec(&self.ops.b, p0, &mut rhs);
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(self.ops.a.len() + n_u);
        for &(i, j, v) in &self.ops.a {
            if !self.ops.u_space.dirichlet[i] && !self.ops.u_space.dirichlet[j] {
                trips.push((i, j, v));
            }
        }
        for d in 0..n_u {
            if self.ops.u_space.dirichlet[d] {
                trips.push((d, d, 1.0));
                rhs[d] = 0.0;
            }
        }
        let f = SkylineMatrix::from_triplets(n_u, &trips).factorize()?;
        let u0 = f.solve(&rhs);
        // residual check
        let mut res = self.ops.mech_load(self.mesh, &self.cfg, 0.0);
        tri_matvec(&self.ops.b, p0, &mut res);
        let mut au = vec![0.0; n_u];
        tri_matvec(&self.ops.a, &u0, &mut au);
        let mut rmax = 0.0f64;
        for d in 0..n_u {
            if !self.ops.u_space.dirichlet[d] {
                rmax = rmax.max((au[d] - res[d]).abs());
            }
        }
        let scale = u0.iter().map(|x| x.abs()).fold(1.0f64, f64::max);
        if rmax > self.cfg.solver_tol * scale * 1e3 {
            return Err(Error::Solver(format!("initial solve residual {rmax:.3e}")));
        }
        Ok(u0)
    }

    /// One backward-Euler step from (u, p) at t to t + dt.
    pub fn step_monolithic(&self, t_next: f64, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n_u = self.ops.n_u();
        let n_p = self.ops.n_p();
        let dt = self.cfg.dt;
        let mut rhs = vec![0.0; n_u + n_p];
        let lu = self.ops.mech_load(self.mesh, &self.cfg, t_next);
        rhs[..n_u].copy_from_slice(&lu);
        // negated flow row: -(dt q + C p^k + B^t u^k)
        let mut rp = self.ops.flow_load(self.mesh, &self.cfg, t_next);
        rp.iter_mut().for_each(|v| *v *= dt);
        tri_matvec(&self.ops.c, p, &mut rp);
        tri_matvec_t(&self.ops.b, u, &mut rp);
        for i in 0..n_p {
            rhs[n_u + i] = -rp[i];
        }
        for d in 0..n_u + n_p {
            if self.constrained[d] {
                rhs[d] = 0.0;
            }
        }
        let sol = self.factor.solve(&rhs);
        (sol[..n_u].to_vec(), sol[n_u..].to_vec())
    }

    /// Max-norm residual of the coupled weak system at a converged state,
    /// restricted to the given dofs (used for interface consistency checks).
    pub fn weak_residual(
        &self,
        t: f64,
        u_prev: &[f64],
        p_prev: &[f64],
        u: &[f64],
        p: &[f64],
        dofs_u: &[usize],
        dofs_p: &[usize],
    ) -> f64 {
        let n_u = self.ops.n_u();
        let n_p = self.ops.n_p();
        let dt = self.cfg.dt;
        let mut ru = self.ops.mech_load(self.mesh, &self.cfg, t);
        ru.iter_mut().for_each(|v| *v = -*v);
        tri_matvec(&self.ops.a, u, &mut ru);
        let mut bp = vec![0.0; n_u];
        tri_matvec(&self.ops.b, p, &mut bp);
        for i in 0..n_u {
            ru[i] -= bp[i];
        }
        let mut rp = self.ops.flow_load(self.mesh, &self.cfg, t);
        rp.iter_mut().for_each(|v| *v = -*v);
        tri_matvec(&self.ops.d, p, &mut rp);
        let mut dp = vec![0.0; n_p];
        for (i, (a, b)) in p.iter().zip(p_prev.iter()).enumerate() {
            dp[i] = (a - b) / dt;
        }
        tri_matvec(&self.ops.c, &dp, &mut rp);
        let mut du = vec![0.0; n_u];
        for (i, (a, b)) in u.iter().zip(u_prev.iter()).enumerate() {
            du[i] = (a - b) / dt;
        }
        tri_matvec_t(&self.ops.b, &du, &mut rp);
        let mut m = 0.0f64;
        for &d in dofs_u {
            if !self.ops.u_space.dirichlet[d] {
                m = m.max(ru[d].abs());
            }
        }
        for &d in dofs_p {
            if !self.ops.p_space.dirichlet[d] {
                m = m.max(rp[d].abs());
            }
        }
        m
    }
}

/// Initial displacement solve as a standalone operation.
pub fn solve_initial_displacement(mesh: &FracturedMesh, cfg: &BiotRunConfig) -> Result<Vec<f64>> {
    let stepper = Stepper::new(mesh, cfg.clone())?;
    let p0 = stepper.ops.initial_pressure(mesh, cfg);
    stepper.solve_initial_displacement(&p0)
}

/// Full transient solve with the monolithic stepper.
pub fn solve_transient(mesh: &FracturedMesh, cfg: &BiotRunConfig) -> Result<TransientSolution> {
    let stepper = Stepper::new(mesh, cfg.clone())?;
    let p0 = stepper.ops.initial_pressure(mesh, cfg);
    let u0 = stepper.solve_initial_displacement(&p0)?;
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut times = vec![0.0];
    let mut p_series = vec![p0];
    let mut u_series = vec![u0];
    for k in 1..=n_steps {
        let t = k as f64 * cfg.dt;
        let (u, p) = stepper.step_monolithic(t, &u_series[k - 1], &p_series[k - 1]);
        times.push(t);
        u_series.push(u);
        p_series.push(p);
    }
    Ok(TransientSolution {
        times,
        p_coeffs: p_series,
        u_coeffs: u_series,
        p_space: stepper.ops.p_space.clone(),
        u_space: stepper.ops.u_space.clone(),
        epsilon: EpsilonTag::Value(cfg.epsilon),
    })
}

/// Reduced storage matrix of the displacement-eliminated pressure system,
/// D^N = O + A^t E^-1 A on the free pressure dofs; exposed so its positive
/// definiteness can be checked directly.
pub fn schur_reduced_storage(
    mesh: &FracturedMesh,
    cfg: &BiotRunConfig,
) -> Result<(usize, Vec<f64>)> {
    let ops = FullOperators::build(mesh, cfg)?;
    let n_u = ops.n_u();
    let n_p = ops.n_p();
    let free_p: Vec<usize> = (0..n_p).filter(|&d| !ops.p_space.dirichlet[d]).collect();
    if free_p.len() > cfg.schur_dof_cap {
        return Err(Error::Solver(format!(
            "schur path dof cap exceeded: {} > {}",
            free_p.len(),
            cfg.schur_dof_cap
        )));
    }
    let mut p_index = vec![usize::MAX; n_p];
    for (k, &d) in free_p.iter().enumerate() {
        p_index[d] = k;
    }
    let m = free_p.len();
    let e_factor = {
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(ops.a.len() + n_u);
        for &(i, j, v) in &ops.a {
            if !ops.u_space.dirichlet[i] && !ops.u_space.dirichlet[j] {
                trips.push((i, j, v));
            }
        }
        for d in 0..n_u {
            if ops.u_space.dirichlet[d] {
                trips.push((d, d, 1.0));
            }
        }
        SkylineMatrix::from_triplets(n_u, &trips).factorize()?
    };
    let mut einv_a: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &pd in &free_p {
        let mut col = vec![0.0; n_u];
        for &(i, j, v) in &ops.b {
            if j == pd && !ops.u_space.dirichlet[i] {
                col[i] += v;
            }
        }
        einv_a.push(e_factor.solve(&col));
    }
    let mut d_n = vec![0.0; m * m];
    for &(i, j, v) in &ops.c {
        if p_index[i] != usize::MAX && p_index[j] != usize::MAX {
            d_n[p_index[i] * m + p_index[j]] += v;
        }
    }
    for &(i, j, v) in &ops.b {
        if p_index[j] == usize::MAX || ops.u_space.dirichlet[i] {
            continue;
        }
        let q = p_index[j];
        for k in 0..m {
            d_n[q * m + k] += v * einv_a[k][i];
        }
    }
    Ok((m, d_n))
}

/// Schur-complement oracle: eliminates the displacement through the
/// elasticity block and advances the reduced pressure system, then
/// reconstructs the displacement.
pub fn solve_transient_schur(
    mesh: &FracturedMesh,
    cfg: &BiotRunConfig,
) -> Result<TransientSolution> {
    let ops = FullOperators::build(mesh, cfg)?;
    let n_u = ops.n_u();
    let n_p = ops.n_p();
    let free_p: Vec<usize> = (0..n_p).filter(|&d| !ops.p_space.dirichlet[d]).collect();
    if free_p.len() > cfg.schur_dof_cap {
        return Err(Error::Solver(format!(
            "schur path dof cap exceeded: {} > {}",
            free_p.len(),
            cfg.schur_dof_cap
        )));
    }
    let mut p_index = vec![usize::MAX; n_p];
    for (k, &d) in free_p.iter().enumerate() {
        p_index[d] = k;
    }
    let m = free_p.len();

    // elasticity factor with identity rows on constrained dofs
    let e_factor = {
        let mut trips: Vec<(usize, usize, f64)> = Vec::with_capacity(ops.a.len() + n_u);
        for &(i, j, v) in &ops.a {
            if !ops.u_space.dirichlet[i] && !ops.u_space.dirichlet[j] {
                trips.push((i, j, v));
            }
        }
        for d in 0..n_u {
            if ops.u_space.dirichlet[d] {
                trips.push((d, d, 1.0));
            }
        }
        SkylineMatrix::from_triplets(n_u, &trips).factorize()?
    };

    // columns of E^-1 A for the free pressure dofs
    let mut einv_a: Vec<Vec<f64>> = Vec::with_capacity(m);
    for &pd in &free_p {
        let mut col = vec![0.0; n_u];
        for &(i, j, v) in &ops.b {
            if j == pd && !ops.u_space.dirichlet[i] {
                col[i] += v;
            }
        }
        einv_a.push(e_factor.solve(&col));
    }

    // D^N = O + A^t E^-1 A and K^N on the free pressure dofs
    let mut d_n = vec![0.0; m * m];
    for &(i, j, v) in &ops.c {
        if p_index[i] != usize::MAX && p_index[j] != usize::MAX {
            d_n[p_index[i] * m + p_index[j]] += v;
        }
    }
    for &(i, j, v) in &ops.b {
        // (A^t E^-1 A)_{qj} = sum_i A_{iq} (E^-1 A_j)_i
        if p_index[j] == usize::MAX || ops.u_space.dirichlet[i] {
            continue;
        }
        let q = p_index[j];
        for k in 0..m {
            d_n[q * m + k] += v * einv_a[k][i];
        }
    }
    let mut k_n = vec![0.0; m * m];
    for &(i, j, v) in &ops.d {
        if p_index[i] != usize::MAX && p_index[j] != usize::MAX {
            k_n[p_index[i] * m + p_index[j]] += v;
        }
    }
    let dt = cfg.dt;
    let mut step_m = vec![0.0; m * m];
    for i in 0..m * m {
        step_m[i] = d_n[i] / dt + k_n[i];
    }
    let step_factor = dense_factorize(m, &step_m)?;

    let full_load = |t: f64| -> Vec<f64> {
        let mut l = ops.mech_load(mesh, cfg, t);
        for d in 0..n_u {
            if ops.u_space.dirichlet[d] {
                l[d] = 0.0;
            }
        }
        l
    };
    let recon_u = |p_red: &[f64], t: f64| -> Vec<f64> {
        // u = E^-1 (L + A P)
        let mut rhs = full_load(t);
        for &(i, j, v) in &ops.b {
            if p_index[j] != usize::MAX && !ops.u_space.dirichlet[i] {
                rhs[i] += v * p_red[p_index[j]];
            }
        }
        e_factor.solve(&rhs)
    };

    let p0_full = ops.initial_pressure(mesh, cfg);
    let p0: Vec<f64> = free_p.iter().map(|&d| p0_full[d]).collect();
    let n_steps = (cfg.t_end / cfg.dt).round() as usize;
    let mut times = vec![0.0];
    let mut p_red_series = vec![p0];
    let mut loads = vec![full_load(0.0)];
    for k in 1..=n_steps {
        let t = k as f64 * cfg.dt;
        loads.push(full_load(t));
        let p_prev = &p_red_series[k - 1];
        // rhs = q(t) + D^N p_prev / dt - A^t E^-1 (L(t) - L(t-dt)) / dt
        let q_full = ops.flow_load(mesh, cfg, t);
        let mut rhs: Vec<f64> = free_p.iter().map(|&d| q_full[d]).collect();
        for i in 0..m {
            let mut acc = 0.0;
            for j in 0..m {
                acc += d_n[i * m + j] * p_prev[j];
            }
            rhs[i] += acc / dt;
        }
        let mut dl = vec![0.0; n_u];
        for i in 0..n_u {
            dl[i] = (loads[k][i] - loads[k - 1][i]) / dt;
        }
        let edl = e_factor.solve(&dl);
        for &(i, j, v) in &ops.b {
            if p_index[j] != usize::MAX && !ops.u_space.dirichlet[i] {
                rhs[p_index[j]] -= v * edl[i];
            }
        }
        let p_next = step_factor.solve(&rhs);
        times.push(t);
        p_red_series.push(p_next);
    }

    // expand to full vectors and reconstruct displacements
    let mut p_series = Vec::with_capacity(times.len());
    let mut u_series = Vec::with_capacity(times.len());
    for (k, pr) in p_red_series.iter().enumerate() {
        let mut p_full = vec![0.0; n_p];
        for (i, &d) in free_p.iter().enumerate() {
            p_full[d] = pr[i];
        }
        u_series.push(recon_u(pr, times[k]));
        p_series.push(p_full);
    }
    Ok(TransientSolution {
        times,
        p_coeffs: p_series,
        u_coeffs: u_series,
        p_space: ops.p_space.clone(),
        u_space: ops.u_space.clone(),
        epsilon: EpsilonTag::Value(cfg.epsilon),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Ratio;
    use crate::geometry::Geometry;
    use crate::materials::MaterialFields;
    use crate::mesh::build_mesh;

    fn cfg_zero_data(eps: f64) -> BiotRunConfig {
        let mut cfg = BiotRunConfig::new(
            Geometry::default_unit(),
            ScalingExponents::coupling_active(Ratio::int(1), Ratio::int(-1)),
            eps,
        );
        cfg.materials = MaterialFields::unit();
        cfg.t_end = 0.1;
        cfg.dt = 0.05;
        cfg
    }

    #[test]
    fn zero_data_gives_zero_series() {
        let cfg = cfg_zero_data(0.5);
        let mesh = build_mesh(&cfg.geometry, 0.25).unwrap();
        let sol = solve_transient(&mesh, &cfg).unwrap();
        for k in 0..sol.times.len() {
            let pu = sol.u_coeffs[k]
                .iter()
                .map(|v| v.abs())
                .fold(0.0f64, f64::max);
            let pp = sol.p_coeffs[k]
                .iter()
                .map(|v| v.abs())
                .fold(0.0f64, f64::max);
            assert!(pu < 1e-13 && pp < 1e-13);
        }
    }

    #[test]
    fn deterministic_and_single_step_consistency() {
        let mut cfg = cfg_zero_data(0.5);
        cfg.materials = MaterialFields::default_study();
        let mesh = build_mesh(&cfg.geometry, 0.25).unwrap();
        let a = solve_transient(&mesh, &cfg).unwrap();
        let b = solve_transient(&mesh, &cfg).unwrap();
        for (x, y) in a.p_coeffs.iter().flatten().zip(b.p_coeffs.iter().flatten()) {
            assert!(x.to_bits() == y.to_bits());
        }
        // single step equals step_monolithic applied once
        let stepper = Stepper::new(&mesh, cfg.clone()).unwrap();
        let p0 = stepper.ops.initial_pressure(&mesh, &cfg);
        let u0 = stepper.solve_initial_displacement(&p0).unwrap();
        let (u1, p1) = stepper.step_monolithic(cfg.dt, &u0, &p0);
        for (x, y) in u1.iter().zip(a.u_coeffs[1].iter()) {
            assert!((x - y).abs() < 1e-14);
        }
        for (x, y) in p1.iter().zip(a.p_coeffs[1].iter()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn energy_dissipates_without_sources() {
        let mut cfg = cfg_zero_data(0.5);
        // nonzero initial pressure only
        cfg.materials.p0_plus = crate::materials::ScalarField::TentX { amplitude: 0.5 };
        cfg.materials.p0_minus = crate::materials::ScalarField::TentX { amplitude: 0.5 };
        cfg.materials.p0_frac = crate::materials::ScalarField::Constant(0.5);
        cfg.t_end = 0.25;
        cfg.dt = 0.05;
        let mesh = build_mesh(&cfg.geometry, 0.25).unwrap();
        let stepper = Stepper::new(&mesh, cfg.clone()).unwrap();
        let sol = solve_transient(&mesh, &cfg).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..sol.times.len() {
            let e = stepper.ops.energy(&sol.u_coeffs[k], &sol.p_coeffs[k]);
            assert!(e <= prev + 1e-12, "energy grew at step {k}: {e} > {prev}");
            prev = e;
        }
    }

    #[test]
    fn schur_path_matches_monolithic() {
        let mut cfg = cfg_zero_data(0.5);
        cfg.materials = MaterialFields::default_study();
        cfg.t_end = 0.2;
        cfg.dt = 0.05;
        let mesh = build_mesh(&cfg.geometry, 0.25).unwrap();
        let a = solve_transient(&mesh, &cfg).unwrap();
        let b = solve_transient_schur(&mesh, &cfg).unwrap();
        let mut scale = 0.0f64;
        for v in a
            .p_coeffs
            .iter()
            .flatten()
            .chain(a.u_coeffs.iter().flatten())
        {
            scale = scale.max(v.abs());
        }
        let mut diff = 0.0f64;
        for (x, y) in a.p_coeffs.iter().flatten().zip(b.p_coeffs.iter().flatten()) {
            diff = diff.max((x - y).abs());
        }
        for (x, y) in a.u_coeffs.iter().flatten().zip(b.u_coeffs.iter().flatten()) {
            diff = diff.max((x - y).abs());
        }
        assert!(diff / scale < 1e-10, "relative diff {}", diff / scale);
    }

    #[test]
    fn schur_cap_enforced() {
        let mut cfg = cfg_zero_data(0.5);
        cfg.schur_dof_cap = 3;
        let mesh = build_mesh(&cfg.geometry, 0.25).unwrap();
        assert!(solve_transient_schur(&mesh, &cfg).is_err());
    }
}
