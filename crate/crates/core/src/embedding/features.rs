use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::model::{ApplicationGraph, NodeId, ResourceGraph};
use crate::placement::PlacementState;

pub const APP_FEATURES: usize = 7;
pub const RES_FEATURES: usize = 11;

/// Per-scenario normalization constants: the maximum of each raw feature.
/// Demands and capacities share one constant per dimension so they stay
/// comparable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScale {
    pub cpu: f64,
    pub gpu: f64,
    pub ram: f64,
    pub stor: f64,
    pub work: f64,
    pub ddl: f64,
    pub pt: f64,
    pub speed: f64,
}

impl Default for FeatureScale {
    fn default() -> Self {
        Self { cpu: 1.0, gpu: 1.0, ram: 1.0, stor: 1.0, work: 1.0, ddl: 1.0, pt: 1.0, speed: 1.0 }
    }
}

fn nonzero(x: f64) -> f64 {
    if x > 0.0 && x.is_finite() {
        x
    } else {
        1.0
    }
}

impl FeatureScale {
    pub fn from_graphs<'a>(res: &ResourceGraph, apps: impl IntoIterator<Item = &'a ApplicationGraph>) -> Self {
        let mut s = [0.0f64; 8];
        for v in res.nodes() {
            for (slot, x) in [v.cpu, v.gpu, v.ram, v.stor].into_iter().enumerate() {
                s[slot] = s[slot].max(x);
            }
            s[6] = s[6].max(v.pt);
            s[7] = s[7].max(v.speed);
        }
        for app in apps {
            for c in app.components() {
                for (slot, x) in [c.cpu, c.gpu, c.ram, c.stor, c.work, c.ddl].into_iter().enumerate() {
                    s[slot] = s[slot].max(x);
                }
            }
        }
        Self {
            cpu: nonzero(s[0]),
            gpu: nonzero(s[1]),
            ram: nonzero(s[2]),
            stor: nonzero(s[3]),
            work: nonzero(s[4]),
            ddl: nonzero(s[5]),
            pt: nonzero(s[6]),
            speed: nonzero(s[7]),
        }
    }
}

/// Rows `[cpu, gpu, ram, stor, work, ddl, placed]`, scaled.
pub fn featurize_application(app: &ApplicationGraph, state: &PlacementState, scale: &FeatureScale) -> Matrix {
    let rows: Vec<Vec<f64>> = app
        .components()
        .iter()
        .enumerate()
        .map(|(i, c)| {
            vec![
                c.cpu / scale.cpu,
                c.gpu / scale.gpu,
                c.ram / scale.ram,
                c.stor / scale.stor,
                c.work / scale.work,
                c.ddl / scale.ddl,
                if state.host(i).is_some() { 1.0 } else { 0.0 },
            ]
        })
        .collect();
    if rows.is_empty() {
        Matrix::zeros(0, APP_FEATURES)
    } else {
        Matrix::from_rows(&rows)
    }
}

/// Rows `[cpu, gpu, ram, stor, pt, speed, residual fraction x4, aval]` for
/// the nodes `global_ids` of a (sub)graph, with residuals and availability
/// read from `state`. Unavailable nodes keep their row.
pub fn featurize_resources(res: &ResourceGraph, global_ids: &[NodeId], state: &PlacementState, scale: &FeatureScale) -> Matrix {
    let mut m = Matrix::zeros(global_ids.len(), RES_FEATURES);
    for (i, &g) in global_ids.iter().enumerate() {
        let v = res.node(g);
        let cap = state.capacity(g).to_array();
        let left = state.residual(g).to_array();
        let row = m.row_mut(i);
        row[0] = v.cpu / scale.cpu;
        row[1] = v.gpu / scale.gpu;
        row[2] = v.ram / scale.ram;
        row[3] = v.stor / scale.stor;
        row[4] = v.pt / scale.pt;
        row[5] = v.speed / scale.speed;
        for d in 0..4 {
            row[6 + d] = if cap[d] > 0.0 { left[d] / cap[d] } else { 0.0 };
        }
        row[10] = if state.available(g) { 1.0 } else { 0.0 };
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    #[test]
    fn placed_flags_follow_host_map() {
        let app = chain_app(3);
        let res = ring(3);
        let scale = FeatureScale::from_graphs(&res, [&app]);
        let s0 = PlacementState::new(&app, &res);
        let flags = |m: &Matrix| (0..m.rows).map(|i| m.get(i, 6)).collect::<Vec<_>>();
        assert_eq!(flags(&featurize_application(&app, &s0, &scale)), vec![0.0; 3]);
        let s1 = s0.apply(&app, &res, 0, 1).unwrap();
        assert_eq!(flags(&featurize_application(&app, &s1, &scale)), vec![1.0, 0.0, 0.0]);
        let s3 = s1.apply(&app, &res, 1, 1).unwrap().apply(&app, &res, 2, 2).unwrap();
        assert_eq!(flags(&featurize_application(&app, &s3, &scale)), vec![1.0; 3]);
    }

    #[test]
    fn residual_fractions_and_availability() {
        let app = chain_app(1);
        let res = ring(3);
        let scale = FeatureScale::from_graphs(&res, [&app]);
        let mut s = PlacementState::new(&app, &res);
        let m = featurize_resources(&res, &[0, 1, 2], &s, &scale);
        // cpu and ram have capacity; gpu and stor are zero-capacity dims.
        assert_eq!(&m.row(0)[6..11], &[1.0, 0.0, 1.0, 0.0, 1.0]);
        s.set_available(2, false);
        let m = featurize_resources(&res, &[0, 1, 2], &s, &scale);
        assert_eq!(m.rows, 3);
        assert_eq!(m.get(2, 10), 0.0);
    }

    #[test]
    fn saturated_node_has_zero_residual() {
        let app = ApplicationGraph::new(vec![comp(0, 4.0, 1.0, 10.0)], vec![]);
        let res = ring(3);
        let scale = FeatureScale::from_graphs(&res, [&app]);
        let s = PlacementState::new(&app, &res).apply(&app, &res, 0, 1).unwrap();
        let m = featurize_resources(&res, &[1], &s, &scale);
        assert_eq!(&m.row(0)[6..10], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(m.get(0, 0), 1.0);
    }

    use crate::model::ApplicationGraph;
}
