use nlpr::denoise::{denoise_1d, neighbors_1d};
use nlpr::harness::{run_edge_study_with, EdgeStudyConfig};
use nlpr::image::{extract_patch_1d, PatchTable};
use nlpr::pgm::{read_pgm, write_pgm};
use nlpr::synth::{edge_patch_cloud, make_checker, make_edge, CheckerSpec, EdgeSpec};
use nlpr::{add_gaussian_noise, denoise, psnr, DenoiseParams, Image, NoiseSpec, SearchParams};
use proptest::prelude::*;

fn edge_params(p: f64) -> DenoiseParams {
    DenoiseParams::new(SearchParams::new(41, 3, 3.0).unwrap(), p, false).unwrap()
}

#[test]
fn clean_edge_is_kept_for_small_p() {
    let edge = make_edge(&EdgeSpec::default()).unwrap();
    let report = denoise_1d(&edge, &edge_params(0.1)).unwrap();
    let worst = report.output.iter().zip(&edge).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-3, "max deviation {worst}");
}

#[test]
fn clean_edge_is_blurred_by_the_weighted_mean() {
    // With h = 3 the cross-edge weights are close to 1, so p = 2 cannot keep the step.
    let edge = make_edge(&EdgeSpec::default()).unwrap();
    let report = denoise_1d(&edge, &edge_params(2.0)).unwrap();
    assert!(report.output[128] < 0.9 && report.output[127] > 0.1);
    assert_eq!(report.output[0], 0.0);
    assert_eq!(report.output[255], 1.0);
}

#[test]
fn noiseless_edge_study_recovers_the_high_side() {
    let cfg = EdgeStudyConfig { sigma: 0.0, ..EdgeStudyConfig::default() };
    let report = run_edge_study_with(&cfg, &[0]).unwrap();
    for (p, mean) in &report.means {
        assert!((mean - 1.0).abs() < 1e-9, "p={p}: {mean}");
    }
}

#[test]
fn edge_cloud_matches_denoiser_extraction() {
    let noisy = nlpr::noise::add_noise_to_slice(&make_edge(&EdgeSpec::default()).unwrap(), NoiseSpec::new(0.3, 4).unwrap());
    let cloud = edge_patch_cloud(&noisy, 130, 20, 3).unwrap();
    let table = PatchTable::new_1d(&noisy, 3).unwrap();
    let search = SearchParams::new(41, 3, 3.0).unwrap();
    let neighbors = neighbors_1d(&table, noisy.len(), 130, &search);
    assert_eq!(cloud.len(), neighbors.len());
    for (patch, n) in cloud.iter().zip(&neighbors) {
        assert_eq!(patch.values(), table.get(n.index.col));
        assert_eq!(patch, &extract_patch_1d(&noisy, n.index.col, 3).unwrap());
    }
}

#[test]
fn denoised_checker_survives_pgm_round_trip() {
    let clean = make_checker(&CheckerSpec { image_side: 32, square_side: 8, low: 0.0, high: 1.0 }).unwrap();
    let noisy = add_gaussian_noise(&clean, NoiseSpec::from_8bit(30.0, 2).unwrap());
    let params = DenoiseParams::new(SearchParams::new(11, 5, 10.0 * 30.0 / 255.0).unwrap(), 0.5, true).unwrap();
    let report = denoise(&noisy, &params).unwrap();
    assert!(psnr(&clean, &report.output).unwrap() > psnr(&clean, &noisy).unwrap() + 3.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.pgm");
    write_pgm(&path, &report.output).unwrap();
    let back = read_pgm(&path).unwrap();
    for (a, b) in back.data().iter().zip(report.output.data()) {
        assert!((a - b.clamp(0.0, 1.0)).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constant_images_are_fixed(value in 0.0f64..1.0, p in prop::sample::select(vec![0.1, 0.5, 1.0, 2.0]), knn: bool) {
        let img = Image::filled(9, 7, value).unwrap();
        let params = DenoiseParams::new(SearchParams::new(5, 3, 0.2).unwrap(), p, knn).unwrap();
        let report = denoise(&img, &params).unwrap();
        prop_assert_eq!(report.output.data(), img.data());
    }

    #[test]
    fn pixel_order_does_not_matter(seed in 0u64..1000) {
        // Transposing the input transposes the output: each pixel is solved on its own.
        let clean = make_checker(&CheckerSpec { image_side: 12, square_side: 3, low: 0.0, high: 1.0 }).unwrap();
        let noisy = add_gaussian_noise(&clean, NoiseSpec::new(0.2, seed).unwrap());
        let t = Image::from_fn(12, 12, |r, c| noisy.data()[c * 12 + r]).unwrap();
        let params = DenoiseParams::new(SearchParams::new(5, 3, 2.0).unwrap(), 1.0, false).unwrap();
        let a = denoise(&noisy, &params).unwrap().output;
        let b = denoise(&t, &params).unwrap().output;
        for r in 0..12 {
            for c in 0..12 {
                prop_assert!((a.data()[r * 12 + c] - b.data()[c * 12 + r]).abs() < 1e-9);
            }
        }
    }
}
