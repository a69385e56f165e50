#[allow(dead_code)]
#[path = "support/oracle_checks.rs"]
mod oracle_checks;

#[test]
fn cube_counts_match_brute_force() {
    oracle_checks::cube_counts_match_brute_force();
}

#[test]
fn balanced_distance_matches_brute_force() {
    oracle_checks::balanced_distance_matches_brute_force();
}

#[test]
fn chamfer_distance_matches_brute_force() {
    oracle_checks::chamfer_distance_matches_brute_force();
}

#[test]
fn knn_and_radius_queries_match_brute_force() {
    oracle_checks::knn_and_radius_queries_match_brute_force();
}

#[test]
fn fpfh_matches_brute_force() {
    oracle_checks::fpfh_matches_brute_force();
}

#[test]
fn icp_step_matches_brute_force() {
    oracle_checks::icp_step_matches_brute_force();
}
