#![allow(dead_code)]

use curricula_core::design::{
    build_model_matrix, enumerate_variants, DesignMatrix, FactorLevels, FactorSpec, FactorialDesign, VariantId,
};

/// Full factorial over the given level counts; mode code = row-major cell index.
pub fn synthetic_design(levels: &[usize]) -> FactorialDesign {
    let factors: Vec<FactorSpec> = levels
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            FactorSpec::new(
                format!("F{i}"),
                (0..n).map(|l| format!("l{l}")).collect(),
            )
            .unwrap()
        })
        .collect();
    let cells: usize = levels.iter().product();
    let map = (0..cells)
        .map(|c| {
            let mut rest = c;
            let mut lv = vec![0; levels.len()];
            for i in (0..levels.len()).rev() {
                lv[i] = rest % levels[i];
                rest /= levels[i];
            }
            (VariantId::new(0, c as u16), FactorLevels(lv))
        })
        .collect();
    FactorialDesign::new("Synthetic", factors, map).unwrap()
}

/// `reps` observations per cell, in variant order.
pub fn balanced(
    design: &FactorialDesign,
    reps: usize,
    mut f: impl FnMut(VariantId, usize) -> f64,
) -> (DesignMatrix, Vec<(VariantId, f64)>) {
    let obs: Vec<(VariantId, f64)> = enumerate_variants(design)
        .into_iter()
        .flat_map(|v| (0..reps).map(move |r| (v, r)))
        .map(|(v, r)| (v, f(v, r)))
        .collect();
    (build_model_matrix(design, &obs).unwrap(), obs)
}

pub fn ys(obs: &[(VariantId, f64)]) -> Vec<f64> {
    obs.iter().map(|o| o.1).collect()
}
