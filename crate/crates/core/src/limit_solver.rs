//! Solvers for the limit models: the bulk problem coupled to the
//! regime-specific fracture and interface equations, plus the a posteriori
//! column reconstructions.
//!
//! All limit systems share one monolithic backward-Euler skeleton
//! [[A, -B], [-B^t, -(C + dt D)]]. The pressure space's dof identifications
//! encode the flow regime, so the fracture storage, source, and Biot
//! coupling terms are assembled by the same column kernels for every
//! regime. The reduced barrier model eliminates the fracture pressure dofs
//! by exact per-column static condensation of the two-scale operator.

use crate::assembly::{
    add_biot_coupling, add_column_stiffness_scalar, add_column_stiffness_vec, add_darcy_stiffness,
    add_elasticity, add_flow_load, add_gamma_consistent_term, add_gamma_load_consistent,
    add_gamma_stiffness, add_mech_load, add_storage_mass, add_strip_coupling_dn, add_strip_load_dn,
    add_strip_load_scalar, add_strip_load_vec, add_strip_mass, Prefactor,
};
use crate::effective::{average_fracture, average_normal, ColumnField, EffectiveParams};
use crate::exponents::{FlowRegime, MechRegime, RegimeDescriptor};
use crate::full_solver::{EpsilonTag, TransientSolution};
use crate::linalg::{SkylineFactor, SkylineMatrix};
use crate::materials::MaterialFields;
use crate::mesh::{FracturedMesh, Subdomain};
use crate::norms::FieldSet;
use crate::spaces::{build_space, SpaceDescriptor, SpaceKind};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechForm {
    /// full-dimensional fracture mechanics with a normal ODE
    TwoScale,
    /// discrete fracture model with the effective interface stress
    ReducedDf,
    /// very soft fracture: mechanics decoupled from the bulk displacement
    Decoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowForm {
    /// single constant fracture pressure
    ConstantPressure,
    /// tangential PDE on gamma
    InterfacePde,
    /// continuous traces, fracture conductivity drops out
    Neutral,
    /// normal ODE through the fracture
    NormalOde,
    /// interface jump condition by static condensation of the normal ODE
    ReducedBarrier,
    /// no flow across gamma; a pointwise fracture equation when storage is on
    Wall,
}

/// An assembled limit model ready for time stepping.
#[derive(Debug, Clone)]
pub struct LimitProblem {
    pub regime: RegimeDescriptor,
    pub mech_form: MechForm,
    pub flow_form: FlowForm,
    pub effective: EffectiveParams,
    pub u_space: SpaceDescriptor,
    /// presentation pressure space of the solution
    pub p_space: SpaceDescriptor,
    /// assembly pressure space (differs from `p_space` only for the reduced
    /// barrier model, which condenses the fracture dofs of Phi^# away)
    assembly_p_space: SpaceDescriptor,
    sigma_f_couples_pressure: bool,
}

fn flow_regime_lt_one(flow: FlowRegime) -> bool {
    matches!(
        flow,
        FlowRegime::IdealConduit | FlowRegime::Conduit | FlowRegime::Neutral
    )
}

/// Select forms and spaces for a regime. With `prefer_reduced` the reduced
/// variants are chosen when their constancy preconditions hold; otherwise
/// the construction refuses with the violated condition named.
pub fn build_limit_problem(
    regime: &RegimeDescriptor,
    effective: &EffectiveParams,
    mesh: &FracturedMesh,
    prefer_reduced: bool,
) -> Result<LimitProblem> {
    // sigma_f pressure branch: the fracture stress carries the pressure
    // unless the regime is a wall without storage
    let sigma_f_couples_pressure = !(regime.flow == FlowRegime::Wall && !regime.storage_present);

    // flow form first: the barrier reduction has its own preconditions
    let flow_form = match regime.flow {
        FlowRegime::IdealConduit => FlowForm::ConstantPressure,
        FlowRegime::Conduit => FlowForm::InterfacePde,
        FlowRegime::Neutral => FlowForm::Neutral,
        FlowRegime::Wall => FlowForm::Wall,
        FlowRegime::Barrier => {
            if !prefer_reduced {
                FlowForm::NormalOde
            } else if regime.storage_present {
                return Err(Error::Limit(
                    "prefer_reduced: the barrier reduction requires a vanishing fracture storage (nu_omega > -1)".into(),
                ));
            } else if !effective.alpha_is_zero && !effective.alpha_const_per_column {
                return Err(Error::Limit(
                    "prefer_reduced: alpha_f_eff must be constant per column for the barrier reduction".into(),
                ));
            } else if !effective.alpha_is_zero && !effective.kfn_const_per_column {
                return Err(Error::Limit(
                    "prefer_reduced: K_f^N must be constant per column when the Biot coupling is active".into(),
                ));
            } else {
                FlowForm::ReducedBarrier
            }
        }
    };

    // mechanics: the interface-stress reduction eliminates the fracture
    // displacement, so it is available only when the flow equation does not
    // need it (alpha_f_eff zero, or a wall without storage, or a pressure
    // constant per column with alpha constant per column)
    let mech_form = match regime.mech {
        MechRegime::VerySoft => MechForm::Decoupled,
        MechRegime::Soft if !prefer_reduced => MechForm::TwoScale,
        MechRegime::Soft => {
            if !sigma_f_couples_pressure || effective.alpha_is_zero {
                MechForm::ReducedDf
            } else if flow_regime_lt_one(regime.flow) {
                if effective.alpha_const_per_column {
                    MechForm::ReducedDf
                } else {
                    return Err(Error::Limit(
                        "prefer_reduced: alpha_f_eff is only piecewise constant per column; the interface-stress reduction needs it constant in the normal direction".into(),
                    ));
                }
            } else {
                // barrier and storage-wall flows keep the fracture
                // displacement in play (even the reduced barrier model stays
                // two-scale in the displacement), so mechanics falls back to
                // the two-scale form
                MechForm::TwoScale
            }
        }
    };

    let u_space = match mech_form {
        MechForm::TwoScale => build_space(mesh, SpaceKind::VSharp)?,
        MechForm::ReducedDf => build_space(mesh, SpaceKind::V1)?,
        MechForm::Decoupled => build_space(mesh, SpaceKind::VGt1)?,
    };

    let (p_space, assembly_p_space) = match flow_form {
        FlowForm::ConstantPressure => {
            let s = build_space(mesh, SpaceKind::PhiLtM1)?;
            (s.clone(), s)
        }
        FlowForm::InterfacePde => {
            let s = build_space(mesh, SpaceKind::PhiM1)?;
            (s.clone(), s)
        }
        FlowForm::Neutral => {
            let s = build_space(mesh, SpaceKind::PhiOpen)?;
            (s.clone(), s)
        }
        FlowForm::NormalOde => {
            let s = build_space(mesh, SpaceKind::PhiSharp)?;
            (s.clone(), s)
        }
        FlowForm::ReducedBarrier => (
            build_space(mesh, SpaceKind::Phi1)?,
            build_space(mesh, SpaceKind::PhiSharp)?,
        ),
        FlowForm::Wall => {
            let base = build_space(mesh, SpaceKind::PhiGt1)?;
            if regime.storage_present {
                // augment with independent nodal fracture dofs for the
                // pointwise flow equation
                let mut aug = base.clone();
                let mut next = aug.n_dofs;
                for v in 0..mesh.n_vertices() {
                    if mesh.vertex_region[v] == Subdomain::Fracture {
                        aug.vertex_dof[v] = Some(next);
                        next += 1;
                    }
                }
                aug.n_dofs = next;
                aug.dirichlet.resize(next, false);
                (aug.clone(), aug)
            } else {
                (base.clone(), base)
            }
        }
    };

    Ok(LimitProblem {
        regime: *regime,
        mech_form,
        flow_form,
        effective: effective.clone(),
        u_space,
        p_space,
        assembly_p_space,
        sigma_f_couples_pressure,
    })
}

/// Linear interpolation of per-station values along gamma.
fn station_interp(mesh: &FracturedMesh, vals: &[f64], y: f64) -> f64 {
    let n = mesh.ny;
    let y0 = mesh.station_y(0);
    let yn = mesh.station_y(n);
    if y <= y0 {
        return vals[0];
    }
    if y >= yn {
        return vals[n];
    }
    for i in 0..n {
        let a = mesh.station_y(i);
        let b = mesh.station_y(i + 1);
        if y <= b {
            let t = (y - a) / (b - a);
            return vals[i] + t * (vals[i + 1] - vals[i]);
        }
    }
    vals[n]
}

// ---------------------------------------------------------------------------
// assembled blocks

struct LimitBlocks {
    a: Vec<(usize, usize, f64)>,
    b: Vec<(usize, usize, f64)>,
    c: Vec<(usize, usize, f64)>,
    d: Vec<(usize, usize, f64)>,
}

impl LimitProblem {
    fn jump_rows(
        &self,
        mesh: &FracturedMesh,
        space: &SpaceDescriptor,
        i: usize,
        comp: usize,
    ) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        if let Some(d) = space.dof(mesh.gamma_plus_vertex(i), comp) {
            v.push((d, 1.0));
        }
        if let Some(d) = space.dof(mesh.gamma_minus_vertex(i), comp) {
            v.push((d, -1.0));
        }
        v
    }

    /// Effective fracture fields evaluated directly from the material
    /// closures with the exact regime switches (the per-segment samples in
    /// `EffectiveParams` serve the interface formulas, which are averaged
    /// quantities; the volumetric terms must see the same point values as
    /// the full problem's assembly).
    fn alpha_eff<'a>(&self, materials: &'a MaterialFields) -> impl Fn(f64, f64) -> [f64; 2] + 'a {
        let on = self.regime.biot_coupled;
        move |s, y| {
            if on {
                let a = materials.biot_frac.eval([s, y]);
                [a[0][0], a[1][0]]
            } else {
                [0.0, 0.0]
            }
        }
    }

    fn omega_eff<'a>(&self, materials: &'a MaterialFields) -> impl Fn(f64, f64) -> f64 + 'a {
        let on = self.regime.storage_present;
        move |s, y| {
            if on {
                materials.storage_frac.eval([s, y], 0.0)
            } else {
                0.0
            }
        }
    }

    fn q_eff<'a>(&self, materials: &'a MaterialFields, t: f64) -> impl Fn(f64, f64) -> f64 + 'a {
        let on = self.regime.flow_source_present;
        let tf = materials.flow_source_time.eval(t);
        move |s, y| {
            if on {
                tf * materials.flow_source_frac.eval([s, y], t)
            } else {
                0.0
            }
        }
    }

    fn f_eff<'a>(
        &self,
        materials: &'a MaterialFields,
        t: f64,
    ) -> impl Fn(f64, f64) -> [f64; 2] + 'a {
        let on = self.regime.mech_source_present;
        let tf = materials.mech_source_time.eval(t);
        move |s, y| {
            if on {
                let f = materials.mech_source_frac.eval([s, y], t);
                [tf * f[0], tf * f[1]]
            } else {
                [0.0, 0.0]
            }
        }
    }

    fn assemble_blocks(&self, mesh: &FracturedMesh, materials: &MaterialFields) -> LimitBlocks {
        let eff = &self.effective;
        let u_sp = &self.u_space;
        let p_sp = &self.assembly_p_space;
        let mut blocks = LimitBlocks {
            a: Vec::new(),
            b: Vec::new(),
            c: Vec::new(),
            d: Vec::new(),
        };

        // bulk parts, shared by every regime
        add_elasticity(&mut blocks.a, mesh, materials, &Prefactor::BulkOnly, u_sp);
        add_biot_coupling(
            &mut blocks.b,
            mesh,
            materials,
            &Prefactor::BulkOnly,
            p_sp,
            u_sp,
        );
        add_storage_mass(&mut blocks.c, mesh, materials, &Prefactor::BulkOnly, p_sp);
        add_darcy_stiffness(&mut blocks.d, mesh, materials, &Prefactor::BulkOnly, p_sp);

        // fracture mechanics
        match self.mech_form {
            MechForm::TwoScale | MechForm::Decoupled => {
                add_column_stiffness_vec(
                    &mut blocks.a,
                    mesh,
                    &|s, y| materials.elast_frac.eval([s, y]).normal_tensor([1.0, 0.0]),
                    u_sp,
                );
                if self.sigma_f_couples_pressure {
                    add_strip_coupling_dn(
                        &mut blocks.b,
                        mesh,
                        &self.alpha_eff(materials),
                        p_sp,
                        u_sp,
                    );
                }
            }
            MechForm::ReducedDf => {
                // <(1/a) C_gamma^N [[u]], [[v]]> on gamma
                for i in 0..mesh.n_stations() {
                    let w = mesh.station_weight(i);
                    let cg = eff.c_gamma_n[i];
                    let a = mesh.geometry.total_aperture(mesh.station_y(i));
                    for ca in 0..2 {
                        for cb in 0..2 {
                            let k = w * cg[ca][cb] / a;
                            if k == 0.0 {
                                continue;
                            }
                            for (rd, rs) in self.jump_rows(mesh, u_sp, i, ca) {
                                for (cd, cs) in self.jump_rows(mesh, u_sp, i, cb) {
                                    blocks.a.push((rd, cd, k * rs * cs));
                                }
                            }
                        }
                    }
                }
                if self.sigma_f_couples_pressure {
                    // <p_gamma c_gamma, [[v]]> with the interface coupling
                    // vector; its transpose is the flow-side jump coupling
                    let trace_p = |i: usize| -> Vec<(usize, f64)> {
                        p_sp.dof(mesh.gamma_plus_vertex(i), 0)
                            .map(|d| (d, 1.0))
                            .into_iter()
                            .collect()
                    };
                    for comp in 0..2 {
                        add_gamma_consistent_term(
                            &mut blocks.b,
                            mesh,
                            &|y| eff.dfm_coupling[eff.station_index(y)][comp],
                            &|i| self.jump_rows(mesh, u_sp, i, comp),
                            &trace_p,
                        );
                    }
                }
            }
        }

        // fracture flow storage: the pressure space's merging makes the same
        // column mass realize the scalar, interface, and nodal variants
        let p_has_fracture = (0..mesh.n_vertices())
            .any(|v| mesh.vertex_region[v] == Subdomain::Fracture && p_sp.vertex_dof[v].is_some());
        if p_has_fracture && self.regime.storage_present {
            add_strip_mass(&mut blocks.c, mesh, &self.omega_eff(materials), p_sp);
        }
        match self.flow_form {
            FlowForm::InterfacePde => {
                let mesh_ref = mesh;
                add_gamma_stiffness(
                    &mut blocks.d,
                    mesh,
                    &|y| {
                        mesh_ref.geometry.total_aperture(y) * eff.k_gamma_tangential_at(mesh_ref, y)
                    },
                    &|i| p_sp.dof(mesh_ref.gamma_plus_vertex(i), 0),
                );
            }
            FlowForm::NormalOde | FlowForm::ReducedBarrier => {
                add_column_stiffness_scalar(
                    &mut blocks.d,
                    mesh,
                    &|s, y| materials.cond_frac.eval([s, y])[0][0],
                    p_sp,
                );
            }
            _ => {}
        }

        blocks
    }

    /// Mechanics load at time t, including the interface/fracture sources.
    fn mech_load(&self, mesh: &FracturedMesh, materials: &MaterialFields, t: f64) -> Vec<f64> {
        let eff = &self.effective;
        let mut rhs = vec![0.0; self.u_space.n_dofs];
        add_mech_load(
            &mut rhs,
            mesh,
            materials,
            &Prefactor::BulkOnly,
            &self.u_space,
            t,
        );
        let tf = materials.mech_source_time.eval(t);
        let gy = materials.gravity[1];
        match self.mech_form {
            MechForm::TwoScale | MechForm::Decoupled => {
                add_strip_load_vec(&mut rhs, mesh, &self.f_eff(materials, t), &self.u_space);
                if self.sigma_f_couples_pressure && gy != 0.0 {
                    // +<G_f alpha_f^eff, dN v> with the limit gravity G_f = y g_y
                    let alpha = self.alpha_eff(materials);
                    add_strip_load_dn(
                        &mut rhs,
                        mesh,
                        &|s, y| {
                            let a = alpha(s, y);
                            [y * gy * a[0], y * gy * a[1]]
                        },
                        &self.u_space,
                    );
                }
            }
            MechForm::ReducedDf => {
                let mesh_ref = mesh;
                // <a A_N f_f^eff, v_-> + <F_gamma^eff, [[v]]>, with exact
                // tangential quadrature so the strip reductions match
                for comp in 0..2 {
                    let af: Vec<f64> = eff.af_gamma.iter().map(|v| v[comp]).collect();
                    let fg: Vec<f64> = eff.f_gamma_eff.iter().map(|v| v[comp]).collect();
                    add_gamma_load_consistent(
                        &mut rhs,
                        mesh,
                        &|y| tf * station_interp(mesh_ref, &af, y),
                        &|i| {
                            self.u_space
                                .dof(mesh_ref.gamma_minus_vertex(i), comp)
                                .map(|d| (d, 1.0))
                                .into_iter()
                                .collect()
                        },
                    );
                    add_gamma_load_consistent(
                        &mut rhs,
                        mesh,
                        &|y| tf * station_interp(mesh_ref, &fg, y),
                        &|i| self.jump_rows(mesh, &self.u_space, i, comp),
                    );
                    if self.sigma_f_couples_pressure && gy != 0.0 {
                        let cg: Vec<f64> = eff.dfm_coupling.iter().map(|v| v[comp]).collect();
                        add_gamma_load_consistent(
                            &mut rhs,
                            mesh,
                            &|y| y * gy * station_interp(mesh_ref, &cg, y),
                            &|i| self.jump_rows(mesh, &self.u_space, i, comp),
                        );
                    }
                }
            }
        }
        rhs
    }

    /// Flow load at time t on the assembly pressure space.
    fn flow_load(&self, mesh: &FracturedMesh, materials: &MaterialFields, t: f64) -> Vec<f64> {
        let mut rhs = vec![0.0; self.assembly_p_space.n_dofs];
        add_flow_load(
            &mut rhs,
            mesh,
            materials,
            &Prefactor::BulkOnly,
            &self.assembly_p_space,
            t,
            1.0,
        );
        add_strip_load_scalar(
            &mut rhs,
            mesh,
            &self.q_eff(materials, t),
            &self.assembly_p_space,
        );
        rhs
    }

    /// Initial pressure on the assembly space: nodal bulk data with the
    /// regime's averaged fracture values on merged dofs.
    fn initial_pressure(
        &self,
        mesh: &FracturedMesh,
        materials: &MaterialFields,
    ) -> Result<Vec<f64>> {
        let p_sp = &self.assembly_p_space;
        let mut p0 = vec![0.0; p_sp.n_dofs];
        for v in 0..mesh.n_vertices() {
            if let Some(d) = p_sp.vertex_dof[v] {
                let (r, pt) = mesh.logical_coords(v);
                p0[d] = materials.initial_pressure(r).eval(pt, 0.0);
            }
        }
        let p0f = |s: f64, y: f64| materials.p0_frac.eval([s, y], 0.0);
        match self.flow_form {
            FlowForm::ConstantPressure => {
                let mean = average_fracture(mesh, &ColumnField::Func(&p0f))?;
                if let Some(d) = p_sp.dof(mesh.gamma_plus_vertex(0), 0) {
                    p0[d] = mean;
                }
            }
            FlowForm::InterfacePde | FlowForm::Neutral => {
                let means = average_normal(mesh, &ColumnField::Func(&p0f))?;
                for i in 0..mesh.n_stations() {
                    if let Some(d) = p_sp.dof(mesh.gamma_plus_vertex(i), 0) {
                        p0[d] = means[i];
                    }
                }
            }
            _ => {}
        }
        for d in 0..p_sp.n_dofs {
            if p_sp.dirichlet[d] {
                p0[d] = 0.0;
            }
        }
        Ok(p0)
    }
}

// ---------------------------------------------------------------------------
// monolithic stepping with optional static condensation

struct ComposedSystem {
    n_u: usize,
    n_p: usize,
    constrained: Vec<bool>,
    /// retained global indices after condensation (all, on the plain path)
    retained: Vec<usize>,
    interior: Vec<usize>,
    global_to_interior: Vec<usize>,
    factor: SkylineFactor,
    ii_factor: Option<SkylineFactor>,
    m_ri: Vec<(usize, usize, f64)>,
    blocks: LimitBlocks,
}

impl ComposedSystem {
    fn build(
        problem: &LimitProblem,
        mesh: &FracturedMesh,
        materials: &MaterialFields,
        dt: f64,
    ) -> Result<Self> {
        let blocks = problem.assemble_blocks(mesh, materials);
        let n_u = problem.u_space.n_dofs;
        let n_p = problem.assembly_p_space.n_dofs;
        let n = n_u + n_p;
        let mut constrained = vec![false; n];
        for d in 0..n_u {
            constrained[d] = problem.u_space.dirichlet[d];
        }
        for d in 0..n_p {
            constrained[n_u + d] = problem.assembly_p_space.dirichlet[d];
        }

        // full step triplets with the flow row negated
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        {
            let mut push = |i: usize, j: usize, v: f64| {
                if !constrained[i] && !constrained[j] && v != 0.0 {
                    trips.push((i, j, v));
                }
            };
            for &(i, j, v) in &blocks.a {
                push(i, j, v);
            }
            for &(i, j, v) in &blocks.b {
                push(i, n_u + j, -v);
                push(n_u + j, i, -v);
            }
            for &(i, j, v) in &blocks.c {
                push(n_u + i, n_u + j, -v);
            }
            for &(i, j, v) in &blocks.d {
                push(n_u + i, n_u + j, -dt * v);
            }
        }

        // interior dofs to condense: merge-free fracture pressure dofs
        let mut is_interior = vec![false; n];
        if problem.flow_form == FlowForm::ReducedBarrier {
            let p_sp = &problem.assembly_p_space;
            let mut shared = vec![false; n_p];
            for i in 0..mesh.n_stations() {
                if let Some(d) = p_sp.dof(mesh.gamma_plus_vertex(i), 0) {
                    shared[d] = true;
                }
                if let Some(d) = p_sp.dof(mesh.gamma_minus_vertex(i), 0) {
                    shared[d] = true;
                }
            }
            for v in 0..mesh.n_vertices() {
                if mesh.vertex_region[v] != Subdomain::Fracture {
                    continue;
                }
                if let Some(d) = p_sp.vertex_dof[v] {
                    if !shared[d] && !constrained[n_u + d] {
                        is_interior[n_u + d] = true;
                    }
                }
            }
        }

        let interior: Vec<usize> = (0..n).filter(|&d| is_interior[d]).collect();
        let retained: Vec<usize> = (0..n).filter(|&d| !is_interior[d]).collect();
        let mut global_to_retained = vec![usize::MAX; n];
        let mut global_to_interior = vec![usize::MAX; n];
        for (k, &d) in retained.iter().enumerate() {
            global_to_retained[d] = k;
        }
        for (k, &d) in interior.iter().enumerate() {
            global_to_interior[d] = k;
        }

        if interior.is_empty() {
            let mut all = trips;
            for d in 0..n {
                if constrained[d] {
                    all.push((d, d, 1.0));
                }
            }
            let factor = SkylineMatrix::from_triplets(n, &all).factorize()?;
            return Ok(ComposedSystem {
                n_u,
                n_p,
                constrained,
                retained,
                interior,
                global_to_interior,
                factor,
                ii_factor: None,
                m_ri: Vec::new(),
                blocks,
            });
        }

        // split and condense: S = M_RR - M_RI M_II^-1 M_IR
        let mut m_rr: Vec<(usize, usize, f64)> = Vec::new();
        let mut m_ri: Vec<(usize, usize, f64)> = Vec::new();
        let mut m_ir: Vec<(usize, usize, f64)> = Vec::new();
        let mut m_ii: Vec<(usize, usize, f64)> = Vec::new();
        for &(i, j, v) in &trips {
            match (is_interior[i], is_interior[j]) {
                (false, false) => m_rr.push((global_to_retained[i], global_to_retained[j], v)),
                (false, true) => m_ri.push((global_to_retained[i], global_to_interior[j], v)),
                (true, false) => m_ir.push((global_to_interior[i], global_to_retained[j], v)),
                (true, true) => m_ii.push((global_to_interior[i], global_to_interior[j], v)),
            }
        }
        let ii_factor = SkylineMatrix::from_triplets(interior.len(), &m_ii).factorize()?;
        let mut coupled: Vec<usize> = m_ir.iter().map(|&(_, r, _)| r).collect();
        coupled.sort_unstable();
        coupled.dedup();
        let mut s_trips = m_rr;
        for &rcol in &coupled {
            let mut col = vec![0.0; interior.len()];
            for &(i, r, v) in &m_ir {
                if r == rcol {
                    col[i] += v;
                }
            }
            let y = ii_factor.solve(&col);
            for &(rrow, i, v) in &m_ri {
                let upd = -v * y[i];
                if upd != 0.0 {
                    s_trips.push((rrow, rcol, upd));
                }
            }
        }
        for (k, &d) in retained.iter().enumerate() {
            if constrained[d] {
                s_trips.push((k, k, 1.0));
            }
        }
        let factor = SkylineMatrix::from_triplets(retained.len(), &s_trips).factorize()?;
        Ok(ComposedSystem {
            n_u,
            n_p,
            constrained,
            retained,
            interior,
            global_to_interior,
            factor,
            ii_factor: Some(ii_factor),
            m_ri,
            blocks,
        })
    }

    /// Full-size step solve; condensed systems eliminate the interior dofs
    /// and leave them at zero in the result.
    fn solve_step(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut rhs = rhs.to_vec();
        for d in 0..n {
            if self.constrained[d] {
                rhs[d] = 0.0;
            }
        }
        if self.interior.is_empty() {
            return self.factor.solve(&rhs);
        }
        let rhs_i: Vec<f64> = self.interior.iter().map(|&d| rhs[d]).collect();
        let w = self.ii_factor.as_ref().unwrap().solve(&rhs_i);
        let mut rhs_r: Vec<f64> = self.retained.iter().map(|&d| rhs[d]).collect();
        for &(r, i, v) in &self.m_ri {
            rhs_r[r] -= v * w[i];
        }
        let x_r = self.factor.solve(&rhs_r);
        let mut x = vec![0.0; n];
        for (k, &d) in self.retained.iter().enumerate() {
            x[d] = x_r[k];
        }
        x
    }

    fn is_condensed(&self, global: usize) -> bool {
        self.global_to_interior[global] != usize::MAX
    }

    /// Recovers the condensed interior values from a step right-hand side
    /// and the solved retained state: p_I = M_II^-1 (rhs_I - M_IR x_R),
    /// using the symmetry M_IR = M_RI^t.
    fn recover_interior(&self, rhs: &[f64], x: &[f64]) -> Vec<(usize, f64)> {
        if self.interior.is_empty() {
            return Vec::new();
        }
        let mut rhs_i: Vec<f64> = self.interior.iter().map(|&d| rhs[d]).collect();
        let x_r: Vec<f64> = self.retained.iter().map(|&d| x[d]).collect();
        for &(r, i, v) in &self.m_ri {
            rhs_i[i] -= v * x_r[r];
        }
        let w = self.ii_factor.as_ref().unwrap().solve(&rhs_i);
        self.interior.iter().cloned().zip(w).collect()
    }

    fn b_matvec(&self, p: &[f64], out: &mut [f64]) {
        for &(i, j, v) in &self.blocks.b {
            out[i] += v * p[j];
        }
    }
    fn bt_matvec(&self, u: &[f64], out: &mut [f64]) {
        for &(i, j, v) in &self.blocks.b {
            out[j] += v * u[i];
        }
    }
    fn c_matvec(&self, p: &[f64], out: &mut [f64]) {
        for &(i, j, v) in &self.blocks.c {
            out[i] += v * p[j];
        }
    }

    fn energy(&self, u: &[f64], p: &[f64]) -> f64 {
        let mut e = 0.0;
        for &(i, j, v) in &self.blocks.a {
            e += 0.5 * u[i] * v * u[j];
        }
        for &(i, j, v) in &self.blocks.c {
            e += 0.5 * p[i] * v * p[j];
        }
        e
    }
}

/// Handle for stepping a limit problem; exposes the assembled energy for
/// dissipation checks.
pub struct LimitStepper<'m> {
    pub problem: &'m LimitProblem,
    pub mesh: &'m FracturedMesh,
    materials: MaterialFields,
    dt: f64,
    sys: ComposedSystem,
}

impl<'m> LimitStepper<'m> {
    pub fn new(
        problem: &'m LimitProblem,
        mesh: &'m FracturedMesh,
        materials: &MaterialFields,
        dt: f64,
    ) -> Result<Self> {
        let sys = ComposedSystem::build(problem, mesh, materials, dt)?;
        Ok(LimitStepper {
            problem,
            mesh,
            materials: materials.clone(),
            dt,
            sys,
        })
    }

    pub fn energy(&self, u: &[f64], p: &[f64]) -> f64 {
        self.sys.energy(u, p)
    }

    /// Coupling between bulk pressure dofs across gamma: max |entry| of the
    /// composed flow blocks linking a plus trace to a minus trace. Used to
    /// verify the wall regime decoupling.
    pub fn cross_gamma_pressure_coupling(&self) -> f64 {
        let p_sp = &self.problem.assembly_p_space;
        let mut plus = vec![false; p_sp.n_dofs];
        let mut minus = vec![false; p_sp.n_dofs];
        for i in 0..self.mesh.n_stations() {
            if let Some(d) = p_sp.dof(self.mesh.gamma_plus_vertex(i), 0) {
                plus[d] = true;
            }
            if let Some(d) = p_sp.dof(self.mesh.gamma_minus_vertex(i), 0) {
                minus[d] = true;
            }
        }
        let mut m = 0.0f64;
        for &(i, j, v) in self.sys.blocks.c.iter().chain(self.sys.blocks.d.iter()) {
            if (plus[i] && minus[j]) || (minus[i] && plus[j]) {
                m = m.max(v.abs());
            }
        }
        m
    }

    /// Max |entry| coupling appended fracture pressure dofs to bulk pressure
    /// dofs (wall regime invariant).
    pub fn fracture_to_bulk_pressure_coupling(&self) -> f64 {
        let p_sp = &self.problem.assembly_p_space;
        let mut frac = vec![false; p_sp.n_dofs];
        for v in 0..self.mesh.n_vertices() {
            if self.mesh.vertex_region[v] == Subdomain::Fracture {
                if let Some(d) = p_sp.vertex_dof[v] {
                    frac[d] = true;
                }
            }
        }
        let mut m = 0.0f64;
        for &(i, j, v) in self.sys.blocks.c.iter().chain(self.sys.blocks.d.iter()) {
            if frac[i] != frac[j] {
                m = m.max(v.abs());
            }
        }
        m
    }

    fn initial_state(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let p0 = self.problem.initial_pressure(self.mesh, &self.materials)?;
        let n_u = self.problem.u_space.n_dofs;
        let mut rhs = self.problem.mech_load(self.mesh, &self.materials, 0.0);
        self.sys.b_matvec(&p0, &mut rhs);
        let mut trips: Vec<(usize, usize, f64)> = Vec::new();
        for &(i, j, v) in &self.sys.blocks.a {
            if !self.problem.u_space.dirichlet[i] && !self.problem.u_space.dirichlet[j] {
                trips.push((i, j, v));
            }
        }
        for d in 0..n_u {
            if self.problem.u_space.dirichlet[d] {
                trips.push((d, d, 1.0));
                rhs[d] = 0.0;
            }
        }
        let f = SkylineMatrix::from_triplets(n_u, &trips).factorize()?;
        let u0 = f.solve(&rhs);
        Ok((u0, p0))
    }

    /// Assembled right-hand side for the step from (u, p) to t_next.
    fn step_rhs(&self, t_next: f64, u: &[f64], p: &[f64]) -> Vec<f64> {
        let n_u = self.sys.n_u;
        let n_p = self.sys.n_p;
        let dt = self.dt;
        let mut rhs = vec![0.0; n_u + n_p];
        let lu = self.problem.mech_load(self.mesh, &self.materials, t_next);
        rhs[..n_u].copy_from_slice(&lu);
        let mut rp = self.problem.flow_load(self.mesh, &self.materials, t_next);
        rp.iter_mut().for_each(|v| *v *= dt);
        self.sys.c_matvec(p, &mut rp);
        self.sys.bt_matvec(u, &mut rp);
        for i in 0..n_p {
            rhs[n_u + i] = -rp[i];
        }
        rhs
    }

    /// One backward-Euler step to t + dt.
    pub fn step(&self, t_next: f64, u: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let rhs = self.step_rhs(t_next, u, p);
        let n_u = self.sys.n_u;
        let sol = self.sys.solve_step(&rhs);
        (sol[..n_u].to_vec(), sol[n_u..].to_vec())
    }
}

/// Solve a limit model over (0, T] with backward Euler.
pub fn solve_limit(
    problem: &LimitProblem,
    mesh: &FracturedMesh,
    materials: &MaterialFields,
    t_end: f64,
    dt: f64,
) -> Result<TransientSolution> {
    if !(dt > 0.0 && t_end >= dt) {
        return Err(Error::Limit("need dt > 0 and t_end >= dt".into()));
    }
    materials.validate(mesh)?;
    let stepper = LimitStepper::new(problem, mesh, materials, dt)?;
    let (u0, mut p0) = stepper.initial_state()?;
    for d in 0..stepper.sys.n_p {
        if stepper.sys.is_condensed(stepper.sys.n_u + d) {
            p0[d] = 0.0;
        }
    }
    let n_steps = (t_end / dt).round() as usize;
    let mut times = vec![0.0];
    let mut u_series = vec![u0];
    let mut p_series = vec![p0];
    for k in 1..=n_steps {
        let t = k as f64 * dt;
        let (u, p) = stepper.step(t, &u_series[k - 1], &p_series[k - 1]);
        times.push(t);
        u_series.push(u);
        p_series.push(p);
    }

    // present the reduced barrier solution on the bulk-only space
    let (p_space, p_series) = if problem.flow_form == FlowForm::ReducedBarrier {
        let pres = problem.p_space.clone();
        let mut mapped = Vec::with_capacity(p_series.len());
        for pv in &p_series {
            let mut out = vec![0.0; pres.n_dofs];
            for v in 0..mesh.n_vertices() {
                if let (Some(dst), Some(src)) =
                    (pres.vertex_dof[v], problem.assembly_p_space.vertex_dof[v])
                {
                    out[dst] = pv[src];
                }
            }
            mapped.push(out);
        }
        (pres, mapped)
    } else {
        (problem.p_space.clone(), p_series)
    };

    Ok(TransientSolution {
        times,
        p_coeffs: p_series,
        u_coeffs: u_series,
        p_space,
        u_space: problem.u_space.clone(),
        epsilon: EpsilonTag::Limit,
    })
}

// ---------------------------------------------------------------------------
// a posteriori column reconstructions

/// Solves the per-column fracture mechanics two-point problem with the bulk
/// traces as Dirichlet data (for reduced discrete-fracture solutions; the
/// fracture pressure must be constant per column).
pub fn reconstruct_fracture_displacement(
    sol: &TransientSolution,
    effective: &EffectiveParams,
    mesh: &FracturedMesh,
    materials: &MaterialFields,
) -> Result<Vec<FieldSet>> {
    // scratch nodal layout covering every vertex, for the consistent strip load
    let scratch = SpaceDescriptor {
        kind: SpaceKind::VSharp,
        ncomp: 2,
        n_dofs: 2 * mesh.n_vertices(),
        vertex_dof: (0..mesh.n_vertices()).map(|v| Some(2 * v)).collect(),
        dirichlet: vec![false; 2 * mesh.n_vertices()],
    };
    let mut out = Vec::with_capacity(sol.times.len());
    for level in 0..sol.times.len() {
        let t = sol.times[level];
        let tf = materials.mech_source_time.eval(t);
        let u = &sol.u_coeffs[level];
        let p = &sol.p_coeffs[level];
        let mut loads = vec![0.0; 2 * mesh.n_vertices()];
        let f_on = !effective.f_f_eff.iter().flatten().all(|f| *f == [0.0, 0.0]);
        add_strip_load_vec(
            &mut loads,
            mesh,
            &|s, y| {
                if f_on {
                    let f = materials.mech_source_frac.eval([s, y], t);
                    [tf * f[0], tf * f[1]]
                } else {
                    [0.0, 0.0]
                }
            },
            &scratch,
        );
        let mut field = FieldSet::zeros(mesh, 2);
        field.has_plus = false;
        field.has_minus = false;
        for (i, col) in mesh.columns.iter().enumerate() {
            let gy = materials.gravity[1] * col.y;
            let w = mesh.station_weight(i);
            let p_col = sol
                .p_space
                .dof(mesh.gamma_plus_vertex(i), 0)
                .map(|d| p[d])
                .unwrap_or(0.0);
            let u_minus = [
                sol.u_space
                    .dof(mesh.gamma_minus_vertex(i), 0)
                    .map(|d| u[d])
                    .unwrap_or(0.0),
                sol.u_space
                    .dof(mesh.gamma_minus_vertex(i), 1)
                    .map(|d| u[d])
                    .unwrap_or(0.0),
            ];
            let u_plus = [
                sol.u_space
                    .dof(mesh.gamma_plus_vertex(i), 0)
                    .map(|d| u[d])
                    .unwrap_or(0.0),
                sol.u_space
                    .dof(mesh.gamma_plus_vertex(i), 1)
                    .map(|d| u[d])
                    .unwrap_or(0.0),
            ];
            let alpha_on = !effective.alpha_is_zero;
            let sol_col = solve_column_bvp_vec(
                mesh,
                col,
                &|s, y| materials.elast_frac.eval([s, y]).normal_tensor([1.0, 0.0]),
                // the assembled interior rows carry the tangential station
                // weight; the unit-column chain sees the load divided by it
                &|k| {
                    let v = col.vertices[k];
                    [loads[2 * v] / w, loads[2 * v + 1] / w]
                },
                &|s, y| {
                    if alpha_on {
                        let a = materials.biot_frac.eval([s, y]);
                        [(p_col + gy) * a[0][0], (p_col + gy) * a[1][0]]
                    } else {
                        [0.0, 0.0]
                    }
                },
                u_minus,
                u_plus,
            )?;
            for (k, &v) in col.vertices.iter().enumerate() {
                field.values[v * 2] = sol_col[2 * k];
                field.values[v * 2 + 1] = sol_col[2 * k + 1];
            }
        }
        out.push(field);
    }
    Ok(out)
}

/// Recovers the fracture pressure of a reduced barrier solution a
/// posteriori: the condensed interior equations are solved with the stored
/// traces and the backward-difference displacement rate, which reproduces
/// the two-scale fracture field to solver accuracy.
pub fn reconstruct_fracture_pressure(
    problem: &LimitProblem,
    sol: &TransientSolution,
    mesh: &FracturedMesh,
    materials: &MaterialFields,
) -> Result<Vec<FieldSet>> {
    if problem.flow_form != FlowForm::ReducedBarrier {
        return Err(Error::Limit(
            "fracture pressure reconstruction applies to reduced barrier solutions".into(),
        ));
    }
    let dt = sol.times[1] - sol.times[0];
    let stepper = LimitStepper::new(problem, mesh, materials, dt)?;
    let n_u = problem.u_space.n_dofs;
    let n_p = problem.assembly_p_space.n_dofs;
    // map the presented bulk pressure back onto the assembly space
    let to_assembly = |pv: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n_p];
        for v in 0..mesh.n_vertices() {
            if let (Some(src_d), Some(dst_d)) = (
                problem.p_space.vertex_dof[v],
                problem.assembly_p_space.vertex_dof[v],
            ) {
                out[dst_d] = pv[src_d];
            }
        }
        out
    };

    let mut out = Vec::with_capacity(sol.times.len());
    for level in 0..sol.times.len() {
        let mut field = FieldSet::zeros(mesh, 1);
        field.has_plus = false;
        field.has_minus = false;
        if level == 0 {
            for v in 0..mesh.n_vertices() {
                let (r, pt) = mesh.logical_coords(v);
                if r == Subdomain::Fracture {
                    field.values[v] = materials.p0_frac.eval(pt, 0.0);
                }
            }
            out.push(field);
            continue;
        }
        let p_prev = to_assembly(&sol.p_coeffs[level - 1]);
        let p_now = to_assembly(&sol.p_coeffs[level]);
        let rhs = stepper.step_rhs(sol.times[level], &sol.u_coeffs[level - 1], &p_prev);
        let mut x = vec![0.0; n_u + n_p];
        x[..n_u].copy_from_slice(&sol.u_coeffs[level]);
        x[n_u..].copy_from_slice(&p_now);
        let interior = stepper.sys.recover_interior(&rhs, &x);
        let mut p_full = p_now;
        for (g, v) in interior {
            p_full[g - n_u] = v;
        }
        for v in 0..mesh.n_vertices() {
            if mesh.vertex_region[v] == Subdomain::Fracture {
                if let Some(d) = problem.assembly_p_space.vertex_dof[v] {
                    field.values[v] = p_full[d];
                }
            }
        }
        out.push(field);
    }
    Ok(out)
}

/// 1D P1 two-point solve on a column for a vector unknown:
/// -dN(M dN u) = f with nodal loads plus a per-segment dN-load g,
/// Dirichlet ends.
fn solve_column_bvp_vec(
    mesh: &FracturedMesh,
    col: &crate::mesh::NormalColumn,
    m_coeff: &dyn Fn(f64, f64) -> [[f64; 2]; 2],
    nodal_load: &dyn Fn(usize) -> [f64; 2],
    g_fn: &dyn Fn(f64, f64) -> [f64; 2],
    left: [f64; 2],
    right: [f64; 2],
) -> Result<Vec<f64>> {
    let nn = col.vertices.len();
    if nn < 2 {
        return Err(Error::Limit("column has no segments".into()));
    }
    let n = 2 * nn;
    let mut trips: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs = vec![0.0; n];
    for k in 0..nn {
        let f = nodal_load(k);
        rhs[2 * k] += f[0];
        rhs[2 * k + 1] += f[1];
    }
    for j in 0..nn - 1 {
        let l = col.seg_len[j];
        let sm = {
            let a = mesh.logical_coords(col.vertices[j]).1[0];
            let b = mesh.logical_coords(col.vertices[j + 1]).1[0];
            (a + b) / 2.0
        };
        let m = m_coeff(sm, col.y);
        let g = g_fn(sm, col.y);
        for a in 0..2 {
            for b in 0..2 {
                let k = m[a][b] / l;
                trips.push((2 * j + a, 2 * j + b, k));
                trips.push((2 * (j + 1) + a, 2 * (j + 1) + b, k));
                trips.push((2 * j + a, 2 * (j + 1) + b, -k));
                trips.push((2 * (j + 1) + a, 2 * j + b, -k));
            }
            rhs[2 * j + a] -= g[a];
            rhs[2 * (j + 1) + a] += g[a];
        }
    }
    let mut fixed = vec![None; n];
    fixed[0] = Some(left[0]);
    fixed[1] = Some(left[1]);
    fixed[n - 2] = Some(right[0]);
    fixed[n - 1] = Some(right[1]);
    solve_small_with_dirichlet(n, trips, rhs, fixed)
}

fn solve_small_with_dirichlet(
    n: usize,
    trips: Vec<(usize, usize, f64)>,
    mut rhs: Vec<f64>,
    fixed: Vec<Option<f64>>,
) -> Result<Vec<f64>> {
    let mut reduced: Vec<(usize, usize, f64)> = Vec::with_capacity(trips.len() + n);
    for (i, j, v) in trips {
        match (fixed[i], fixed[j]) {
            (None, None) => reduced.push((i, j, v)),
            (None, Some(g)) => rhs[i] -= v * g,
            _ => {}
        }
    }
    for d in 0..n {
        if let Some(g) = fixed[d] {
            reduced.push((d, d, 1.0));
            rhs[d] = g;
        }
    }
    let f = SkylineMatrix::from_triplets(n, &reduced).factorize()?;
    Ok(f.solve(&rhs))
}
