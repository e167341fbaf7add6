use potlab_core::measures::{Domain, Weight};
use potlab_core::orthopoly::{orthonormal_basis, BasisOptions};
use potlab_core::partition::partition_norm_product;
use potlab_core::problem::ProblemFile;
use potlab_core::reference::Reference;
use potlab_core::Error;

#[test]
fn files_reproduce_reference_problems() {
    let cases = [
        (
            Reference::Circle,
            r#"{"domain": {"kind": "circle", "params": {"radius": 1.0}}, "weight": {"kind": "unit"},
                "measure": {"normalize": true}}"#,
        ),
        (
            Reference::Segment,
            r#"{"domain": {"kind": "interval-union", "params": {"intervals": [[-1.0, 1.0]]}},
                "weight": {"kind": "unit"}}"#,
        ),
        (
            Reference::Gaussian,
            r#"{"domain": {"kind": "interval-union", "params": {"intervals": [[-2.0, 2.0]]}},
                "weight": {"kind": "polynomial-field", "params": {"coeffs": [0.0, 0.0, 1.0]}}}"#,
        ),
    ];
    for (r, text) in cases {
        let from_file = ProblemFile::parse(text).unwrap().problem(6).unwrap();
        let built = r.for_level(6).unwrap();
        assert_eq!(from_file, built, "{}", r.name());
        let b = orthonormal_basis(&from_file, 6, BasisOptions::default()).unwrap();
        assert!(partition_norm_product(&b).log_z.is_finite());
    }
}

#[test]
fn invalid_files_are_config_errors() {
    let bad = [
        "not json",
        r#"{"domain": {"kind": "interval-union", "params": {"intervals": [[1.0, -1.0]]}}, "weight": {"kind": "unit"}}"#,
        r#"{"domain": {"kind": "circle", "params": {"radius": 1.0}}, "weight": {"kind": "unit"}, "extra": 1}"#,
        r#"{"domain": {"kind": "circle", "params": {"radius": 1.0}}, "weight": {"kind": "unit"}, "measure": {"order": 0}}"#,
        r#"{"domain": {"kind": "circle", "params": {"radius": 1.0}}, "weight": {"kind": "tabulated", "params": {"nodes": [[0.0, 0.0]], "values": [-1.0]}}}"#,
    ];
    for text in bad {
        match ProblemFile::parse(text) {
            Err(Error::Config(_)) => {}
            other => panic!("{text}: {other:?}"),
        }
    }
}

#[test]
fn load_reports_the_path() {
    let dir = std::env::temp_dir().join(format!("potlab-core-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("p.json");
    std::fs::write(
        &path,
        r#"{"domain": {"kind": "disk", "params": {"radius": 0.0}}, "weight": {"kind": "unit"}}"#,
    )
    .unwrap();
    let e = ProblemFile::load(&path).unwrap_err().to_string();
    assert!(e.contains("p.json") && e.contains("domain"), "{e}");
    std::fs::write(
        &path,
        r#"{"domain": {"kind": "disk", "params": {"radius": 2.0}}, "weight": {"kind": "unit"}}"#,
    )
    .unwrap();
    let f = ProblemFile::load(&path).unwrap();
    assert_eq!(f.domain, Domain::disk(2.0).unwrap());
    assert_eq!(f.weight, Weight::Unit);
    std::fs::remove_dir_all(&dir).unwrap();
}
