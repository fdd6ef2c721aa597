use std::fs;

use osfs_core::trace::{load_trace, preprocess, DesignMatrix, DEFAULT_VARIANCE_THRESHOLD};
use osfs_core::Error;
use proptest::prelude::*;

#[test]
fn load_from_disk_and_write_back() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "cpu,mem,y\n0.5,1e3,2\n1.5,2e3,4\n2.5,-3e3,8\n").unwrap();
    let m = load_trace(&path, Some("y")).unwrap();
    assert_eq!(m.n_features(), 2);
    assert_eq!(m.column(1), &[1000.0, 2000.0, -3000.0]);

    let out = dir.path().join("copy.csv");
    m.save_csv(&out, "y").unwrap();
    let back = load_trace(&out, Some("y")).unwrap();
    assert_eq!(back.columns(), m.columns());
    assert_eq!(back.targets(), m.targets());
    assert_eq!(back.feature_ids(), m.feature_ids());
}

#[test]
fn malformed_row_reports_the_physical_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    fs::write(&path, "a,b\n1,2\n3,4\n5\n").unwrap();
    assert!(matches!(
        load_trace(&path, None),
        Err(Error::MalformedRow { line: 4, expected: 2, found: 1 })
    ));
}

#[test]
fn missing_target_cell_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.csv");
    fs::write(&path, "a,y\n1,2\n3,\n").unwrap();
    assert!(matches!(
        load_trace(&path, Some("y")),
        Err(Error::MissingTargetValue { line: 3 })
    ));
}

fn matrix_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
    (2usize..30, 1usize..6).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop::collection::vec(-1e6f64..1e6, n), m)
    })
}

proptest! {
    #[test]
    fn round_trip_is_bit_exact(rows in matrix_strategy()) {
        let m = DesignMatrix::from_rows(&rows, None).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf, "y").unwrap();
        let back = osfs_core::trace::read_trace(buf.as_slice(), None).unwrap();
        for (a, b) in m.columns().iter().zip(back.columns()) {
            for (x, y) in a.iter().zip(b) {
                prop_assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn preprocessing_is_idempotent(rows in matrix_strategy()) {
        let m = DesignMatrix::from_rows(&rows, None).unwrap();
        let (once, report) = preprocess(&m, DEFAULT_VARIANCE_THRESHOLD).unwrap();
        prop_assert_eq!(
            report.retained_count + report.dropped_low_variance.len() + report.dropped_non_numeric.len(),
            m.n_features()
        );
        for c in once.columns() {
            prop_assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(osfs_core::trace::population_variance(c) >= DEFAULT_VARIANCE_THRESHOLD);
        }
        if once.n_features() > 0 {
            let (twice, again) = preprocess(&once, DEFAULT_VARIANCE_THRESHOLD).unwrap();
            prop_assert_eq!(again.retained_count, once.n_features());
            for (a, b) in once.columns().iter().zip(twice.columns()) {
                for (x, y) in a.iter().zip(b) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn prefixes_nest(rows in matrix_strategy(), a in 1usize..30, b in 1usize..30) {
        let m = DesignMatrix::from_rows(&rows, None).unwrap();
        let (t1, t2) = (a.min(b).min(rows.len()), a.max(b).min(rows.len()));
        let p1 = m.prefix(t1).unwrap();
        let p2 = m.prefix(t2).unwrap();
        for (c1, c2) in p1.columns().iter().zip(p2.columns()) {
            prop_assert_eq!(&c1[..], &c2[..t1]);
        }
    }
}
