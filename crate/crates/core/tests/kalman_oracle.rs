mod common;

use common::kalman_oracle_gap;
use thermal_bayes::thermal::ModelKind;

#[test]
fn tite_filter_matches_joint_gaussian() {
    let gap = kalman_oracle_gap(ModelKind::TiTe, 50, 5);
    assert!(gap < 1e-8, "gap {gap}");
}

#[test]
fn ti_filter_matches_joint_gaussian() {
    let gap = kalman_oracle_gap(ModelKind::Ti, 20, 12);
    assert!(gap < 1e-8, "gap {gap}");
}

#[test]
fn titeth_filter_matches_joint_gaussian() {
    let gap = kalman_oracle_gap(ModelKind::TiTeTh, 20, 8);
    assert!(gap < 1e-8, "gap {gap}");
}
