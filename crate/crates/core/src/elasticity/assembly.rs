use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use super::mesh::WallMesh;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElasticityParams {
    /// Young's modulus per story (Pa), indexed by element tag; replaced by
    /// the sampled values in parametric runs.
    #[serde(default)]
    pub youngs: Vec<f64>,
    #[serde(default = "defaults::poisson")]
    pub poisson: f64,
    /// Mass density (kg/m³).
    #[serde(default = "defaults::density")]
    pub density: f64,
    /// Out-of-plane thickness (m).
    #[serde(default = "defaults::thickness")]
    pub thickness: f64,
    /// Body force per unit volume (N/m³).
    #[serde(default)]
    pub body_force: [f64; 2],
}

mod defaults {
    pub fn poisson() -> f64 {
        0.2
    }
    pub fn density() -> f64 {
        2500.0
    }
    pub fn thickness() -> f64 {
        1.0
    }
}

impl Default for ElasticityParams {
    fn default() -> Self {
        ElasticityParams::with_youngs(Vec::new())
    }
}

impl ElasticityParams {
    pub fn with_youngs(youngs: Vec<f64>) -> Self {
        ElasticityParams {
            youngs,
            poisson: defaults::poisson(),
            density: defaults::density(),
            thickness: defaults::thickness(),
            body_force: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.youngs.is_empty() || self.youngs.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!(
                "Young's moduli must be positive: {:?}",
                self.youngs
            )));
        }
        if !(0.0..0.5).contains(&self.poisson) {
            return Err(Error::Config(format!(
                "Poisson ratio {} outside [0, 0.5)",
                self.poisson
            )));
        }
        if !(self.density > 0.0 && self.thickness > 0.0) {
            return Err(Error::Config(
                "density and thickness must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Plane-stress constitutive matrix for modulus `e`.
    pub fn constitutive(&self, e: f64) -> SMatrix<f64, 3, 3> {
        let nu = self.poisson;
        let c = e / (1.0 - nu * nu);
        SMatrix::<f64, 3, 3>::new(
            c,
            c * nu,
            0.0,
            c * nu,
            c,
            0.0,
            0.0,
            0.0,
            c * 0.5 * (1.0 - nu),
        )
    }
}

/// Free-DOF operators of a mesh.
#[derive(Clone, Debug)]
pub struct StructuralSystem {
    pub stiffness: DMatrix<f64>,
    /// Lumped (diagonal) mass.
    pub mass: Vec<f64>,
    /// Consistent nodal load of the body force.
    pub body_load: Vec<f64>,
    /// 1 on horizontal DOFs, 0 on vertical ones.
    pub influence: Vec<f64>,
}

const GAUSS: [f64; 2] = [-0.577_350_269_189_625_8, 0.577_350_269_189_625_8];
const XI: [f64; 4] = [-1.0, 1.0, 1.0, -1.0];
const ETA: [f64; 4] = [-1.0, -1.0, 1.0, 1.0];

/// Bilinear shape values and physical-coordinate gradients at `(ξ, η)`,
/// with the Jacobian determinant.
fn shape_at(coords: &[[f64; 2]; 4], xi: f64, eta: f64) -> Result<([f64; 4], [[f64; 2]; 4], f64)> {
    let mut n = [0.0; 4];
    let mut dref = [[0.0; 2]; 4];
    for i in 0..4 {
        n[i] = 0.25 * (1.0 + XI[i] * xi) * (1.0 + ETA[i] * eta);
        dref[i] = [
            0.25 * XI[i] * (1.0 + ETA[i] * eta),
            0.25 * ETA[i] * (1.0 + XI[i] * xi),
        ];
    }
    let mut j = [[0.0; 2]; 2];
    for i in 0..4 {
        for a in 0..2 {
            j[0][a] += dref[i][0] * coords[i][a];
            j[1][a] += dref[i][1] * coords[i][a];
        }
    }
    let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
    if det.is_nan() || det <= 0.0 {
        return Err(Error::Geometry(format!("non-positive Jacobian {det}")));
    }
    let inv = [
        [j[1][1] / det, -j[0][1] / det],
        [-j[1][0] / det, j[0][0] / det],
    ];
    let mut grad = [[0.0; 2]; 4];
    for i in 0..4 {
        grad[i] = [
            inv[0][0] * dref[i][0] + inv[0][1] * dref[i][1],
            inv[1][0] * dref[i][0] + inv[1][1] * dref[i][1],
        ];
    }
    Ok((n, grad, det))
}

/// Element stiffness, lumped nodal masses and body-force loads.
fn element_matrices(
    coords: &[[f64; 2]; 4],
    d: &SMatrix<f64, 3, 3>,
    params: &ElasticityParams,
) -> Result<(SMatrix<f64, 8, 8>, [f64; 4], [f64; 8])> {
    let t = params.thickness;
    let mut ke = SMatrix::<f64, 8, 8>::zeros();
    let mut me = [0.0; 4];
    let mut fe = [0.0; 8];
    for &xi in &GAUSS {
        for &eta in &GAUSS {
            let (n, grad, det) = shape_at(coords, xi, eta)?;
            let mut b = SMatrix::<f64, 3, 8>::zeros();
            for i in 0..4 {
                b[(0, 2 * i)] = grad[i][0];
                b[(1, 2 * i + 1)] = grad[i][1];
                b[(2, 2 * i)] = grad[i][1];
                b[(2, 2 * i + 1)] = grad[i][0];
            }
            let w = det * t;
            ke += b.transpose() * d * b * w;
            for i in 0..4 {
                me[i] += params.density * n[i] * w;
                fe[2 * i] += params.body_force[0] * n[i] * w;
                fe[2 * i + 1] += params.body_force[1] * n[i] * w;
            }
        }
    }
    Ok((ke, me, fe))
}

/// Assemble stiffness, lumped mass and loads on the free DOFs. Fails if the
/// stiffness is not positive definite, i.e. the constraints leave a rigid mode.
pub fn assemble_system(mesh: &WallMesh, params: &ElasticityParams) -> Result<StructuralSystem> {
    params.validate()?;
    if let Some(&t) = mesh.tags.iter().find(|&&t| t >= params.youngs.len()) {
        return Err(Error::Config(format!(
            "element region {t} has no Young's modulus ({} given)",
            params.youngs.len()
        )));
    }
    let n = mesh.free_dofs();
    let mut k = DMatrix::<f64>::zeros(n, n);
    let mut mass = vec![0.0; n];
    let mut body_load = vec![0.0; n];
    let constitutive: Vec<_> = params
        .youngs
        .iter()
        .map(|&e| params.constitutive(e))
        .collect();
    for (el, &tag) in mesh.elements.iter().zip(&mesh.tags) {
        let coords = el.map(|i| mesh.nodes[i]);
        let (ke, me, fe) = element_matrices(&coords, &constitutive[tag], params)?;
        let dofs: [Option<usize>; 8] = std::array::from_fn(|a| mesh.dof(el[a / 2], a % 2));
        for a in 0..8 {
            let Some(ga) = dofs[a] else { continue };
            mass[ga] += me[a / 2];
            body_load[ga] += fe[a];
            for b in 0..8 {
                if let Some(gb) = dofs[b] {
                    k[(ga, gb)] += ke[(a, b)];
                }
            }
        }
    }
    // Element matrices are symmetric to rounding; enforce exact symmetry.
    for i in 0..n {
        for j in 0..i {
            let s = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    if n > 0 && k.clone().cholesky().is_none() {
        return Err(Error::Numeric(
            "stiffness is not positive definite; constraints leave a rigid-body mode".into(),
        ));
    }
    let mut influence = vec![0.0; n];
    for node in 0..mesh.nodes.len() {
        if let Some(d) = mesh.dof(node, 0) {
            influence[d] = 1.0;
        }
    }
    Ok(StructuralSystem {
        stiffness: k,
        mass,
        body_load,
        influence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_lumped_mass_is_quarter_each() {
        let mesh = WallMesh::rectangle(1.0, 1.0, 1, 1).unwrap();
        let sys = assemble_system(&mesh, &ElasticityParams::with_youngs(vec![1e9])).unwrap();
        for m in &sys.mass {
            assert!((m - 625.0).abs() < 1e-9);
        }
        assert_eq!(sys.influence, vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn unconstrained_panel_is_singular() {
        let nodes = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mesh =
            WallMesh::new(nodes, vec![[0, 1, 2, 3]], vec![0], vec![false; 8], vec![]).unwrap();
        let err = assemble_system(&mesh, &ElasticityParams::with_youngs(vec![1e9])).unwrap_err();
        assert!(matches!(err, Error::Numeric(_)));
    }

    #[test]
    fn missing_story_modulus_is_config_error() {
        let mesh = WallMesh::rectangle(1.0, 1.0, 1, 1).unwrap();
        assert!(assemble_system(&mesh, &ElasticityParams::with_youngs(vec![])).is_err());
    }
}
