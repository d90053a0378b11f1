use finsler_core::analysis::{verify_all, verify_conformal, Identity, Verdict};
use finsler_core::catalog::{build_hermitian, standard_catalog, HermitianData, NamedRho};
use finsler_core::exec::ExecMode;
use finsler_core::sampling::{sample_points, SampleSpec};

#[test]
fn every_identity_holds_on_the_catalog() {
    for (name, entry) in standard_catalog() {
        let metric = entry.build().unwrap();
        let pts = sample_points(&metric, &SampleSpec { count: 5, seed: 31, ..Default::default() }).unwrap().points;
        for report in verify_all(&metric, &pts, |_| None, ExecMode::Parallel).unwrap() {
            assert!(report.passed(), "{name} {}: {:.2e}", report.name, report.max_rel);
        }
    }
}

#[test]
fn conditional_identities_skip_when_hypothesis_fails() {
    let g = build_hermitian(&HermitianData::conformal_flat(2, &NamedRho::ReZ1.scalar()).unwrap()).unwrap();
    let pts = sample_points(&g, &SampleSpec { count: 3, seed: 1, ..Default::default() }).unwrap().points;
    let reports = verify_all(&g, &pts, |_| None, ExecMode::Sequential).unwrap();
    let balanced = reports.iter().find(|r| r.name == Identity::BalancedContractions.name()).unwrap();
    assert_eq!(balanced.verdict, Verdict::Skipped);
    assert!(balanced.skipped_reason.is_some());
}

#[test]
fn conformal_laws_hold_on_flat_and_fubini_study() {
    for base in [HermitianData::flat(2), HermitianData::fubini_study(2)] {
        let g = build_hermitian(&base).unwrap();
        let pts = sample_points(&g, &SampleSpec { count: 4, seed: 2, ..Default::default() }).unwrap().points;
        for rho in [NamedRho::Constant(0.7), NamedRho::AbsZ1Squared, NamedRho::ReZ1Z2] {
            for r in verify_conformal(&g, &rho.scalar(), &pts, None, ExecMode::Sequential).unwrap() {
                assert!(r.passed(), "{} {:?} {}: {:.2e}", base.name, rho, r.name, r.max_rel);
            }
        }
    }
}
