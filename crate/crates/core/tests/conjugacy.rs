mod oracles;

use oracles::*;

#[test]
fn cluster_posterior_matches_quadrature() {
    for seed in 0..5 {
        let inst = conjugate_instance(1000 + seed);
        let err = cluster_posterior_error(&inst);
        assert!(err <= 1e-4, "instance {seed}: {err:e}");
    }
}

#[test]
fn new_cluster_marginal_matches_quadrature() {
    for seed in 0..5 {
        let inst = conjugate_instance(1000 + seed);
        let err = single_marginal_error(&inst);
        assert!(err <= 1e-4, "instance {seed}: {err:e}");
    }
}

#[test]
fn eta_conditional_matches_quadrature() {
    for seed in 0..5 {
        let inst = conjugate_instance(1000 + seed);
        let err = eta_conditional_error(&inst, 2000 + seed);
        assert!(err <= 1e-4, "instance {seed}: {err:e}");
    }
}

#[test]
fn partition_prior_normalizes_and_factorizes() {
    check_partition_prior().unwrap();
}

#[test]
fn helmert_identities() {
    check_helmert().unwrap();
}

#[test]
fn post_processing_fixtures() {
    check_post_processing().unwrap();
}
