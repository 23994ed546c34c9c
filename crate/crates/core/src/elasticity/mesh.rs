use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coupled shear wall: two piers joined by one coupling beam per story, with
/// a full-height opening column between them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallGeometry {
    /// Story heights from the base up (m).
    pub story_heights: Vec<f64>,
    /// Widths of the left and right piers (m).
    pub pier_widths: [f64; 2],
    /// Clear width of the openings between the piers (m).
    pub opening_width: f64,
    /// Depth of the coupling beam at the top of each story (m).
    pub beam_depth: f64,
    /// Target element edge length (m).
    pub element_size: f64,
}

impl Default for WallGeometry {
    fn default() -> Self {
        WallGeometry {
            story_heights: vec![3.0; 3],
            pier_widths: [2.75, 2.75],
            opening_width: 1.5,
            beam_depth: 0.75,
            element_size: 0.25,
        }
    }
}

/// Conforming 4-node quadrilateral mesh with per-DOF constraints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallMesh {
    pub nodes: Vec<[f64; 2]>,
    /// Counterclockwise node ids.
    pub elements: Vec<[usize; 4]>,
    /// Region (story) index per element.
    pub tags: Vec<usize>,
    /// `constrained[2·node + c]` for components `c = 0 (x), 1 (y)`.
    pub constrained: Vec<bool>,
    pub monitored: Vec<usize>,
    dof_map: Vec<Option<usize>>,
    free_dofs: usize,
}

/// Split `[a, b]` into `ceil((b − a)/h)` equal pieces; returns interior and end points.
fn subdivide(a: f64, b: f64, h: f64) -> Vec<f64> {
    let n = ((b - a) / h - 1e-9).ceil().max(1.0) as usize;
    (1..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect()
}

impl WallMesh {
    /// Mesh from explicit nodes and elements; DOF numbering follows node order.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        elements: Vec<[usize; 4]>,
        tags: Vec<usize>,
        constrained: Vec<bool>,
        monitored: Vec<usize>,
    ) -> Result<Self> {
        if tags.len() != elements.len() || constrained.len() != 2 * nodes.len() {
            return Err(Error::Geometry(
                "tag or constraint array has the wrong length".into(),
            ));
        }
        for (e, el) in elements.iter().enumerate() {
            if el.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Geometry(format!(
                    "element {e} references a missing node"
                )));
            }
            for i in 0..4 {
                for j in i + 1..4 {
                    if el[i] == el[j] {
                        return Err(Error::Geometry(format!(
                            "element {e} repeats node {}",
                            el[i]
                        )));
                    }
                }
            }
            let signed_area: f64 = (0..4)
                .map(|i| {
                    let (p, q) = (nodes[el[i]], nodes[el[(i + 1) % 4]]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum();
            if signed_area <= 0.0 {
                return Err(Error::Geometry(format!(
                    "element {e} is not counterclockwise"
                )));
            }
        }
        if let Some(&m) = monitored.iter().find(|&&m| m >= nodes.len()) {
            return Err(Error::Geometry(format!(
                "monitored node {m} does not exist"
            )));
        }
        let mut dof_map = vec![None; constrained.len()];
        let mut free_dofs = 0;
        for (slot, &fixed) in dof_map.iter_mut().zip(&constrained) {
            if !fixed {
                *slot = Some(free_dofs);
                free_dofs += 1;
            }
        }
        Ok(WallMesh {
            nodes,
            elements,
            tags,
            constrained,
            monitored,
            dof_map,
            free_dofs,
        })
    }

    /// Rectangular panel `[0, width] × [0, height]` with `nx × ny` elements,
    /// base fully fixed.
    pub fn rectangle(width: f64, height: f64, nx: usize, ny: usize) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) || nx == 0 || ny == 0 {
            return Err(Error::Geometry(
                "panel needs positive size and element counts".into(),
            ));
        }
        let xs: Vec<f64> = (0..=nx).map(|i| width * i as f64 / nx as f64).collect();
        let ys: Vec<f64> = (0..=ny).map(|j| height * j as f64 / ny as f64).collect();
        Self::from_grid(&xs, &ys, |_, _| true, |_| 0, vec![])
    }

    /// Tensor-product grid keeping the cells for which `keep(i, j)` holds.
    fn from_grid(
        xs: &[f64],
        ys: &[f64],
        keep: impl Fn(usize, usize) -> bool,
        tag: impl Fn(f64) -> usize,
        monitored_points: Vec<[f64; 2]>,
    ) -> Result<Self> {
        let (nx, ny) = (xs.len() - 1, ys.len() - 1);
        let mut id = vec![None; xs.len() * ys.len()];
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let mut tags = Vec::new();
        let mut node_id = |i: usize, j: usize, nodes: &mut Vec<[f64; 2]>| {
            *id[j * xs.len() + i].get_or_insert_with(|| {
                nodes.push([xs[i], ys[j]]);
                nodes.len() - 1
            })
        };
        for j in 0..ny {
            for i in 0..nx {
                if !keep(i, j) {
                    continue;
                }
                let el = [
                    node_id(i, j, &mut nodes),
                    node_id(i + 1, j, &mut nodes),
                    node_id(i + 1, j + 1, &mut nodes),
                    node_id(i, j + 1, &mut nodes),
                ];
                elements.push(el);
                tags.push(tag(0.5 * (ys[j] + ys[j + 1])));
            }
        }
        let base = ys[0];
        let constrained = nodes
            .iter()
            .flat_map(|p| {
                let fixed = p[1] == base;
                [fixed, fixed]
            })
            .collect();
        let monitored = monitored_points
            .iter()
            .map(|q| {
                nodes
                    .iter()
                    .position(|p| (p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9)
                    .ok_or_else(|| Error::Geometry(format!("no node at monitored point {q:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        WallMesh::new(nodes, elements, tags, constrained, monitored)
    }

    pub fn free_dofs(&self) -> usize {
        self.free_dofs
    }

    /// Equation number of component `c` of `node`, `None` if constrained.
    pub fn dof(&self, node: usize, c: usize) -> Option<usize> {
        self.dof_map[2 * node + c]
    }

    /// Free-DOF indices of the horizontal displacement of the monitored nodes.
    pub fn monitored_dofs(&self) -> Vec<usize> {
        self.monitored
            .iter()
            .filter_map(|&n| self.dof(n, 0))
            .collect()
    }

    /// Label per free DOF, `n<node>:x` or `n<node>:y`.
    pub fn dof_labels(&self) -> Vec<String> {
        let mut labels = vec![String::new(); self.free_dofs];
        for (slot, d) in self.dof_map.iter().enumerate() {
            if let Some(d) = d {
                labels[*d] = format!("n{}:{}", slot / 2, if slot % 2 == 0 { "x" } else { "y" });
            }
        }
        labels
    }
}

/// Build the coupled-wall mesh; monitored nodes sit on the left edge at the top of each story.
pub fn build_wall_mesh(g: &WallGeometry) -> Result<WallMesh> {
    let dims = g.story_heights.iter().chain(&g.pier_widths).chain([
        &g.opening_width,
        &g.beam_depth,
        &g.element_size,
    ]);
    if g.story_heights.is_empty() || dims.clone().any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::Geometry(
            "all wall dimensions must be positive".into(),
        ));
    }
    if let Some(h) = g.story_heights.iter().find(|&&h| h <= g.beam_depth) {
        return Err(Error::Geometry(format!(
            "coupling beam depth {} leaves no opening in a {h} m story",
            g.beam_depth
        )));
    }
    let h = g.element_size;
    let [w1, w2] = g.pier_widths;
    let mut xs = vec![0.0];
    xs.extend(subdivide(0.0, w1, h));
    let open_first = xs.len() - 1;
    xs.extend(subdivide(w1, w1 + g.opening_width, h));
    let open_x = open_first..xs.len() - 1;
    xs.extend(subdivide(
        w1 + g.opening_width,
        w1 + g.opening_width + w2,
        h,
    ));

    let mut ys = vec![0.0];
    let mut open_rows = Vec::new();
    let mut tops = Vec::new();
    let mut y0 = 0.0;
    for &sh in &g.story_heights {
        let first = ys.len() - 1;
        ys.extend(subdivide(y0, y0 + sh - g.beam_depth, h));
        open_rows.push(first..ys.len() - 1);
        ys.extend(subdivide(y0 + sh - g.beam_depth, y0 + sh, h));
        y0 += sh;
        tops.push(y0);
    }
    let in_opening =
        |i: usize, j: usize| open_x.contains(&i) && open_rows.iter().any(|r| r.contains(&j));
    let tag = |yc: f64| tops.iter().position(|&t| yc < t).unwrap_or(tops.len() - 1);
    let monitored = tops.iter().map(|&t| [0.0, t]).collect();
    WallMesh::from_grid(&xs, &ys, |i, j| !in_opening(i, j), tag, monitored)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_panel_has_four_free_dofs() {
        let m = WallMesh::rectangle(1.0, 1.0, 1, 1).unwrap();
        assert_eq!(m.nodes.len(), 4);
        assert_eq!(m.constrained.iter().filter(|&&c| c).count(), 4);
        assert_eq!(m.free_dofs(), 4);
    }

    #[test]
    fn clockwise_element_rejected() {
        let nodes = vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
        let err = WallMesh::new(nodes, vec![[0, 1, 2, 3]], vec![0], vec![false; 8], vec![]);
        assert!(matches!(err, Err(Error::Geometry(_))));
    }

    #[test]
    fn beam_deeper_than_story_is_geometry_error() {
        let g = WallGeometry {
            beam_depth: 3.5,
            ..WallGeometry::default()
        };
        assert!(matches!(build_wall_mesh(&g), Err(Error::Geometry(_))));
    }

    #[test]
    fn default_wall_tags_three_stories() {
        let m = build_wall_mesh(&WallGeometry::default()).unwrap();
        assert_eq!(m.monitored.len(), 3);
        for s in 0..3 {
            assert!(m.tags.contains(&s));
        }
    }
}
