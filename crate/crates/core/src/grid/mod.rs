//! Structured two-phase grids with duplicated interface nodes, and the
//! matrix-valued fields living on them.

mod field;
mod initial;
mod snapshot;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use field::{dirichlet_energy, l2_distance_sq, MatrixField, PairedField};
pub use initial::{make_initial, InitialRecipe};
pub use snapshot::{read_snapshot, write_snapshot};

/// Which side of the interface a node belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Plus,
    Minus,
}

impl Phase {
    pub const BOTH: [Phase; 2] = [Phase::Plus, Phase::Minus];

    pub fn det_sign(self) -> i8 {
        match self {
            Phase::Plus => 1,
            Phase::Minus => -1,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Phase::Plus => 0,
            Phase::Minus => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Plus => "plus",
            Phase::Minus => "minus",
        }
    }
}

/// Domain shape and resolution.
///
/// `FlatBox` is (-1,1)^dim cut by {x_dim = offset}; the plus phase is the
/// upper part. `PolarDisk` is the unit-style annulus r_core < r < r_outer cut
/// by the circle r = r_interface; the plus phase is inside.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    FlatBox {
        dim: usize,
        /// Cells across each phase in the normal direction.
        cells: usize,
        /// Cells along x in two dimensions; ignored in one.
        #[serde(default)]
        cells_x: usize,
        #[serde(default)]
        offset: f64,
    },
    PolarDisk {
        r_core: f64,
        r_interface: f64,
        r_outer: f64,
        nr_in: usize,
        nr_out: usize,
        ntheta: usize,
    },
}

impl Geometry {
    pub fn flat_1d(cells: usize) -> Self {
        Geometry::FlatBox { dim: 1, cells, cells_x: 0, offset: 0.0 }
    }

    pub fn flat_2d(cells: usize, cells_x: usize) -> Self {
        Geometry::FlatBox { dim: 2, cells, cells_x, offset: 0.0 }
    }

    /// Disk of radius `r_outer` with the default core r_core = 0.05 r_outer.
    pub fn disk(r_interface: f64, r_outer: f64, nr_in: usize, nr_out: usize, ntheta: usize) -> Self {
        Geometry::PolarDisk { r_core: 0.05 * r_outer, r_interface, r_outer, nr_in, nr_out, ntheta }
    }

    pub fn dim(&self) -> usize {
        match self {
            Geometry::FlatBox { dim, .. } => *dim,
            Geometry::PolarDisk { .. } => 2,
        }
    }

    /// Interface location: the offset for a box, the radius for a disk.
    pub fn interface_position(&self) -> f64 {
        match self {
            Geometry::FlatBox { offset, .. } => *offset,
            Geometry::PolarDisk { r_interface, .. } => *r_interface,
        }
    }

    /// Same resolution with the interface moved.
    pub fn with_interface(&self, position: f64) -> Self {
        let mut g = self.clone();
        match &mut g {
            Geometry::FlatBox { offset, .. } => *offset = position,
            Geometry::PolarDisk { r_interface, .. } => *r_interface = position,
        }
        g
    }

    /// Signed distance to the interface, positive on the minus side.
    pub fn signed_distance(&self, pos: [f64; 2]) -> f64 {
        match self {
            Geometry::FlatBox { dim, offset, .. } => offset - pos[dim - 1],
            Geometry::PolarDisk { r_interface, .. } => (pos[0] * pos[0] + pos[1] * pos[1]).sqrt() - r_interface,
        }
    }

    /// Lebesgue measure of the discretized domain.
    pub fn analytic_volume(&self) -> f64 {
        match self {
            Geometry::FlatBox { dim, .. } => 2f64.powi(*dim as i32),
            Geometry::PolarDisk { r_core, r_outer, .. } => PI * (r_outer * r_outer - r_core * r_core),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: &str| Err(Error::InvalidParameter { name, reason: reason.to_string() });
        match self {
            Geometry::FlatBox { dim, cells, cells_x, offset } => {
                if *dim != 1 && *dim != 2 {
                    return bad("dim", "must be 1 or 2");
                }
                if *cells < 2 {
                    return bad("cells", "need at least 2 cells per phase");
                }
                if *dim == 2 && *cells_x < 2 {
                    return bad("cells_x", "need at least 2 cells along x");
                }
                if !offset.is_finite() || offset.abs() >= 0.95 {
                    return bad("offset", "interface must satisfy |offset| < 0.95");
                }
            }
            Geometry::PolarDisk { r_core, r_interface, r_outer, nr_in, nr_out, ntheta } => {
                if !(*r_core > 0.0 && r_core < r_interface && r_interface < r_outer && r_outer.is_finite()) {
                    return bad("r_interface", "need 0 < r_core < r_interface < r_outer");
                }
                if *nr_in < 2 || *nr_out < 2 {
                    return bad("nr_in", "need at least 2 radial cells per phase");
                }
                if *ntheta < 8 {
                    return bad("ntheta", "need at least 8 angular cells");
                }
            }
        }
        Ok(())
    }
}

/// Finite-difference stencil of one node along one local axis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AxisStencil {
    pub prev: Option<usize>,
    pub next: Option<usize>,
    /// Physical distances to prev / next.
    pub h_prev: f64,
    pub h_next: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub pos: [f64; 2],
    /// Quadrature weight (discrete Lebesgue measure).
    pub volume: f64,
    /// Index along the normal direction; 0 on the interface.
    pub normal_index: usize,
    pub tangential_index: usize,
    /// Unit physical directions of the local axes (normal first).
    pub axes: [[f64; 2]; 2],
    pub stencil: [AxisStencil; 2],
    pub pair: Option<usize>,
}

/// Gradient quadrature edge: contributes coef · ‖A(b) − A(a)‖².
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub length: f64,
    pub transverse: f64,
    pub coef: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseGrid {
    pub phase: Phase,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub normal_levels: usize,
    pub tangential_count: usize,
}

impl PhaseGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_id(&self, normal: usize, tangential: usize) -> usize {
        normal * self.tangential_count + tangential
    }

    pub fn total_volume(&self) -> f64 {
        self.nodes.iter().map(|n| n.volume).sum()
    }
}

/// A duplicated interface location: node `plus` of the plus phase and node
/// `minus` of the minus phase sit at the same point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfacePair {
    pub plus: usize,
    pub minus: usize,
    /// Discrete (d−1)-dimensional measure carried by the pair.
    pub area: f64,
    pub pos: [f64; 2],
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwoPhaseGrid {
    geometry: Geometry,
    phases: [PhaseGrid; 2],
    pairs: Vec<InterfacePair>,
}

fn trapezoid(count: usize, spacing: f64, i: usize) -> f64 {
    if i == 0 || i == count - 1 {
        0.5 * spacing
    } else {
        spacing
    }
}

impl TwoPhaseGrid {
    pub fn new(geometry: Geometry) -> Result<Self> {
        geometry.validate()?;
        let phases = [Self::build_phase(&geometry, Phase::Plus), Self::build_phase(&geometry, Phase::Minus)];
        let tan = phases[0].tangential_count;
        let pairs = (0..tan)
            .map(|i| {
                let p = &phases[0].nodes[i];
                let area = match &geometry {
                    Geometry::FlatBox { dim: 1, .. } => 1.0,
                    Geometry::FlatBox { cells_x, .. } => trapezoid(cells_x + 1, 2.0 / *cells_x as f64, i),
                    Geometry::PolarDisk { r_interface, ntheta, .. } => r_interface * 2.0 * PI / *ntheta as f64,
                };
                InterfacePair { plus: i, minus: i, area, pos: p.pos }
            })
            .collect();
        let mut grid = Self { geometry, phases, pairs };
        for k in 0..grid.pairs.len() {
            let (p, m) = (grid.pairs[k].plus, grid.pairs[k].minus);
            grid.phases[0].nodes[p].pair = Some(k);
            grid.phases[1].nodes[m].pair = Some(k);
        }
        Ok(grid)
    }

    fn build_phase(geometry: &Geometry, phase: Phase) -> PhaseGrid {
        // Sign of the normal-index direction relative to the outward coordinate.
        let up = match phase {
            Phase::Plus => 1.0,
            Phase::Minus => -1.0,
        };
        let mut nodes = Vec::new();
        let mut edges = Vec::new();
        let (normal_levels, tan_count);
        match *geometry {
            Geometry::FlatBox { dim, cells, cells_x, offset } => {
                let extent = if up > 0.0 { 1.0 - offset } else { offset + 1.0 };
                let dn = extent / cells as f64;
                normal_levels = cells + 1;
                tan_count = if dim == 1 { 1 } else { cells_x + 1 };
                let dx = if dim == 1 { 1.0 } else { 2.0 / cells_x as f64 };
                for j in 0..normal_levels {
                    for i in 0..tan_count {
                        let xn = offset + up * dn * j as f64;
                        let pos = if dim == 1 { [xn, 0.0] } else { [-1.0 + dx * i as f64, xn] };
                        let wn = trapezoid(normal_levels, dn, j);
                        let wt = if dim == 1 { 1.0 } else { trapezoid(tan_count, dx, i) };
                        let normal_axis = if dim == 1 { [up, 0.0] } else { [0.0, up] };
                        let id = j * tan_count + i;
                        let normal = AxisStencil {
                            prev: (j > 0).then(|| id - tan_count),
                            next: (j + 1 < normal_levels).then(|| id + tan_count),
                            h_prev: dn,
                            h_next: dn,
                        };
                        let tangential = if dim == 1 {
                            AxisStencil { prev: None, next: None, h_prev: 0.0, h_next: 0.0 }
                        } else {
                            AxisStencil {
                                prev: (i > 0).then(|| id - 1),
                                next: (i + 1 < tan_count).then(|| id + 1),
                                h_prev: dx,
                                h_next: dx,
                            }
                        };
                        nodes.push(Node {
                            pos,
                            volume: wn * wt,
                            normal_index: j,
                            tangential_index: i,
                            axes: [normal_axis, [1.0, 0.0]],
                            stencil: [normal, tangential],
                            pair: None,
                        });
                        if j + 1 < normal_levels {
                            edges.push(Edge { a: id, b: id + tan_count, length: dn, transverse: wt, coef: wt / dn });
                        }
                        if dim == 2 && i + 1 < tan_count {
                            edges.push(Edge { a: id, b: id + 1, length: dx, transverse: wn, coef: wn / dx });
                        }
                    }
                }
            }
            Geometry::PolarDisk { r_core, r_interface, r_outer, nr_in, nr_out, ntheta } => {
                let (cells, extent) = if up > 0.0 { (nr_in, r_interface - r_core) } else { (nr_out, r_outer - r_interface) };
                // Plus phase is inside: increasing normal index means decreasing r.
                let step = -up;
                let dr = extent / cells as f64;
                let dtheta = 2.0 * PI / ntheta as f64;
                normal_levels = cells + 1;
                tan_count = ntheta;
                for j in 0..normal_levels {
                    let r = r_interface + step * dr * j as f64;
                    let wn = trapezoid(normal_levels, dr, j);
                    for i in 0..tan_count {
                        let theta = dtheta * i as f64;
                        let (s, c) = theta.sin_cos();
                        let id = j * tan_count + i;
                        let ring = j * tan_count;
                        let normal = AxisStencil {
                            prev: (j > 0).then(|| id - tan_count),
                            next: (j + 1 < normal_levels).then(|| id + tan_count),
                            h_prev: dr,
                            h_next: dr,
                        };
                        let arc = r * dtheta;
                        let tangential = AxisStencil {
                            prev: Some(ring + (i + tan_count - 1) % tan_count),
                            next: Some(ring + (i + 1) % tan_count),
                            h_prev: arc,
                            h_next: arc,
                        };
                        nodes.push(Node {
                            pos: [r * c, r * s],
                            volume: wn * r * dtheta,
                            normal_index: j,
                            tangential_index: i,
                            axes: [[step * c, step * s], [-s, c]],
                            stencil: [normal, tangential],
                            pair: None,
                        });
                        if j + 1 < normal_levels {
                            let r_mid = r + 0.5 * step * dr;
                            edges.push(Edge {
                                a: id,
                                b: id + tan_count,
                                length: dr,
                                transverse: r_mid * dtheta,
                                coef: r_mid * dtheta / dr,
                            });
                        }
                        edges.push(Edge {
                            a: id,
                            b: ring + (i + 1) % tan_count,
                            length: arc,
                            transverse: wn,
                            coef: wn / arc,
                        });
                    }
                }
            }
        }
        PhaseGrid { phase, nodes, edges, normal_levels, tangential_count: tan_count }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dim(&self) -> usize {
        self.geometry.dim()
    }

    pub fn phase(&self, phase: Phase) -> &PhaseGrid {
        &self.phases[phase.index()]
    }

    pub fn pairs(&self) -> &[InterfacePair] {
        &self.pairs
    }

    pub fn total_volume(&self) -> f64 {
        self.phases.iter().map(PhaseGrid::total_volume).sum()
    }

    pub fn interface_area(&self) -> f64 {
        self.pairs.iter().map(|p| p.area).sum()
    }

    /// Smallest edge length over both phases.
    pub fn min_spacing(&self) -> f64 {
        self.phases
            .iter()
            .flat_map(|p| p.edges.iter().map(|e| e.length))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn node_count(&self) -> usize {
        self.phases[0].len() + self.phases[1].len()
    }
}
