use factorvae::data::{generate_mini_shapes, load_factor_archive, sample_fixed_factor_rows};
use factorvae::rng::SeedStream;
use factorvae::Error;

const MINI_SHAPES_HASH: &str = "11b4d445e5c72a518a06f04ed553df35c878ece522a908487605976e5a1b437e";
const MINI_SHAPES_MEAN: f64 = 0.07096354166666667;

#[test]
fn mini_shapes_is_the_full_factor_grid() {
    let d = generate_mini_shapes();
    assert_eq!(d.len(), d.spec.grid_size());
    assert_eq!(d.len(), 3 * 3 * 8 * 8);
    assert_eq!((d.height, d.width, d.channels), (32, 32, 1));
    for row in [0, 1, 100, 575] {
        let want: Vec<u32> = d.spec.classes_of(row).iter().map(|&c| c as u32).collect();
        assert_eq!(d.factors_of(row), &want[..]);
    }
}

#[test]
fn mini_shapes_golden_values() {
    let a = generate_mini_shapes();
    let b = generate_mini_shapes();
    assert_eq!(a, b);
    assert_eq!(a.content_hash(), MINI_SHAPES_HASH);
    assert_eq!(a.mean_intensity(), MINI_SHAPES_MEAN);
}

#[test]
fn strata_partition_the_rows() {
    let d = generate_mini_shapes();
    assert_eq!(d.stratum(0, 1).unwrap().len(), 192);
    for k in 0..d.num_factors() {
        let total: usize = (0..d.spec.cardinalities[k]).map(|v| d.stratum(k, v).unwrap().len()).sum();
        assert_eq!(total, d.len());
    }
    assert!(matches!(d.stratum(0, 3), Err(Error::Index(_))));
}

#[test]
fn fixed_factor_rows_hold_the_factor() {
    let d = generate_mini_shapes();
    let mut s = SeedStream::new(4);
    // More rows than the stratum holds: drawn with replacement.
    let rows = sample_fixed_factor_rows(&d, 1, 2, 500, &mut s).unwrap();
    assert_eq!(rows.len(), 500);
    assert!(rows.iter().all(|&r| d.factor(r, 1) == 2));
}

#[test]
fn npz_round_trip_preserves_pixels_and_classes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.npz");
    let d = generate_mini_shapes();
    d.export_npz(&path).unwrap();
    let back = load_factor_archive(&path).unwrap();
    // The archive carries no factor names, so only positions survive.
    assert_eq!(back.spec.cardinalities, d.spec.cardinalities);
    assert_eq!(back.pixel_scale(), d.pixel_scale());
    assert_eq!(back.spec.names, ["factor0", "factor1", "factor2", "factor3"]);
    let again = dir.path().join("again.npz");
    back.export_npz(&again).unwrap();
    assert_eq!(load_factor_archive(&again).unwrap().content_hash(), back.content_hash());
    assert_eq!(back.len(), d.len());
    for row in [0, 17, 575] {
        assert_eq!(back.factors_of(row), d.factors_of(row));
        assert_eq!(back.raw_image(row), d.raw_image(row));
    }
}

#[test]
fn truncated_archive_is_a_format_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mini.npz");
    generate_mini_shapes().export_npz(&path).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.npz");
    std::fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let err = load_factor_archive(&cut).unwrap_err();
    assert!(matches!(err, Error::Format { .. }), "{err}");
}

#[test]
fn missing_archive_is_an_io_error() {
    let err = load_factor_archive(std::path::Path::new("/nonexistent/x.npz")).unwrap_err();
    assert!(matches!(err, Error::Io { .. }));
}
