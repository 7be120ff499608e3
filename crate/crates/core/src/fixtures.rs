//! Shared test data: the four-subsystem 2x2 reference family.

use crate::linalg::Matrix;
use crate::system::{DwellBounds, Instance, SubsystemFamily, SwitchGraph};

pub fn reference_family() -> Vec<Matrix> {
    [
        [0.796323, -0.9122466, -0.7126696, 0.1040671],
        [0.9660338, -0.972049, -0.6582197, -0.94077],
        [-0.5085495, -0.6519882, -0.7370684, -0.5013346],
        [-0.990773, 0.8742857, 0.780567, 0.9401844],
    ]
    .iter()
    .map(|e| Matrix::new(2, 2, e).unwrap())
    .collect()
}

pub fn reference_edges() -> Vec<(usize, usize)> {
    vec![(1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 1)]
}

pub fn reference_instance() -> Instance {
    Instance::new(
        SubsystemFamily::new(reference_family()).unwrap(),
        DwellBounds::new(2, 3).unwrap(),
        SwitchGraph::new(4, reference_edges()).unwrap(),
    )
}
