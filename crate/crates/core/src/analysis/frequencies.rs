//! Tile statistics of a patch: kind and family-pair frequencies, and the
//! equidistribution of each tile's position relative to the other three
//! grid families.

use serde::Serialize;

use crate::pentagrid::{family_pairs, line_intersection, TileKind, TilingPatch, TAU};

use super::stats::ks_uniform;
use super::AnalysisError;

/// Smallest patch radius for which the statistics are meaningful.
pub const MIN_FREQUENCY_RADIUS: f64 = 100.0;

#[derive(Debug, Clone, Serialize)]
pub struct PairCount {
    pub families: (u8, u8),
    /// Difference class `k − j`.
    pub class: u8,
    pub count: usize,
    pub frequency: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassSummary {
    pub class: u8,
    pub pairs: usize,
    pub mean_frequency: f64,
    /// Largest `|f − mean| / mean` over the pairs of the class.
    pub max_relative_deviation: f64,
    /// Reference weight `τ^{1 − ⌊d/2⌋}` of the invariant measure on the class.
    pub weight: f64,
    /// KS distance of the pooled residuals from the uniform law.
    pub residual_discrepancy: f64,
    pub residuals: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TileFrequencies {
    pub radius: f64,
    pub tiles: usize,
    pub thick: usize,
    pub thin: usize,
    pub thick_thin_ratio: f64,
    pub pairs: Vec<PairCount>,
    pub classes: Vec<ClassSummary>,
    pub max_within_class_deviation: f64,
    pub max_residual_discrepancy: f64,
}

pub fn tile_frequencies(patch: &TilingPatch) -> Result<TileFrequencies, AnalysisError> {
    if patch.radius < MIN_FREQUENCY_RADIUS {
        return Err(AnalysisError::PatchTooSmall {
            radius: patch.radius,
            need: MIN_FREQUENCY_RADIUS,
        });
    }
    let total = patch.len();
    let mut counts = [[0usize; 5]; 5];
    let mut residuals: [Vec<f64>; 5] = Default::default();
    for t in &patch.tiles {
        let (j, k) = (t.families.0 as usize, t.families.1 as usize);
        counts[j][k] += 1;
        let z = line_intersection(j, t.indices.0, k, t.indices.1, &patch.params)
            .expect("tiles of a patch come from valid intersections");
        for m in (0..5).filter(|&m| m != j && m != k) {
            let g = patch.params.grid_coordinate(m, z);
            residuals[k - j].push(g - g.floor());
        }
    }

    let pairs: Vec<PairCount> = family_pairs()
        .map(|(j, k)| PairCount {
            families: (j as u8, k as u8),
            class: (k - j) as u8,
            count: counts[j][k],
            frequency: counts[j][k] as f64 / total as f64,
        })
        .collect();

    let mut classes = Vec::new();
    for d in 1..=4u8 {
        let members: Vec<&PairCount> = pairs.iter().filter(|p| p.class == d).collect();
        let mean = members.iter().map(|p| p.frequency).sum::<f64>() / members.len() as f64;
        let dev = members
            .iter()
            .map(|p| (p.frequency - mean).abs() / mean)
            .fold(0.0, f64::max);
        classes.push(ClassSummary {
            class: d,
            pairs: members.len(),
            mean_frequency: mean,
            max_relative_deviation: dev,
            weight: TAU.powi(1 - (d as i32) / 2),
            residual_discrepancy: ks_uniform(&residuals[d as usize]),
            residuals: residuals[d as usize].len(),
        });
    }

    let thick = patch.count_kind(TileKind::Thick);
    let thin = patch.count_kind(TileKind::Thin);
    Ok(TileFrequencies {
        radius: patch.radius,
        tiles: total,
        thick,
        thin,
        thick_thin_ratio: thick as f64 / thin as f64,
        max_within_class_deviation: classes.iter().map(|c| c.max_relative_deviation).fold(0.0, f64::max),
        max_residual_discrepancy: classes.iter().map(|c| c.residual_discrepancy).fold(0.0, f64::max),
        pairs,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pentagrid::{generate_patch, GridParams};

    #[test]
    fn frequencies_at_radius_120() {
        let patch = generate_patch(120.0, &GridParams::default()).unwrap();
        let f = tile_frequencies(&patch).unwrap();
        // Independent recount of kinds from the family pairs.
        let thick: usize = f
            .pairs
            .iter()
            .filter(|p| TileKind::for_families(p.families.0 as usize, p.families.1 as usize) == TileKind::Thick)
            .map(|p| p.count)
            .sum();
        assert_eq!(thick, f.thick);
        assert_eq!(f.thick + f.thin, f.tiles);
        assert!((f.thick_thin_ratio - TAU).abs() < 0.02);
        assert_eq!(f.classes.iter().map(|c| c.pairs).collect::<Vec<_>>(), vec![4, 3, 2, 1]);
        assert!(f.max_within_class_deviation < 0.03);
        assert!(f.max_residual_discrepancy < 0.03);
        assert_eq!(f.classes[0].weight, TAU);
        assert_eq!(f.classes[2].weight, 1.0);
    }

    #[test]
    fn small_patch_rejected() {
        let patch = generate_patch(30.0, &GridParams::default()).unwrap();
        assert!(matches!(
            tile_frequencies(&patch),
            Err(AnalysisError::PatchTooSmall { .. })
        ));
    }
}
