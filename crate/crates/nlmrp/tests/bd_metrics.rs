//! Validates the Bjontegaard deltas against an independent oracle that
//! fits through a Vandermonde solve (or uncentered normal equations for
//! more than four points) and integrates numerically by trapezoid, and
//! checks PSNR against a plain two-pass computation.

use nlmrp::frame::{Frame, Plane};
use nlmrp::metrics::{bd_psnr, bd_rate, psnr, RdCurve, RdPoint};
use nlmrp::synth::Prng;

#[allow(clippy::needless_range_loop)]
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    (0..n).map(|i| b[i] / a[i][i]).collect()
}

/// Cubic coefficients (constant term first) fitted without centering:
/// exact interpolation for 4 points, normal equations otherwise.
fn oracle_fit(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    if xs.len() == 4 {
        let a: Vec<Vec<f64>> = xs.iter().map(|&x| vec![1.0, x, x * x, x * x * x]).collect();
        solve(a, ys.to_vec())
    } else {
        let mut a = vec![vec![0.0; 4]; 4];
        let mut b = vec![0.0; 4];
        for (&x, &y) in xs.iter().zip(ys) {
            let px = [1.0, x, x * x, x * x * x];
            for i in 0..4 {
                for j in 0..4 {
                    a[i][j] += px[i] * px[j];
                }
                b[i] += px[i] * y;
            }
        }
        solve(a, b)
    }
}

fn trapezoid_mean(c: &[f64], lo: f64, hi: f64, samples: usize) -> f64 {
    let eval = |x: f64| c[0] + x * (c[1] + x * (c[2] + x * c[3]));
    let mut acc = 0.0;
    let step = (hi - lo) / samples as f64;
    for i in 0..samples {
        let x0 = lo + step * i as f64;
        acc += (eval(x0) + eval(x0 + step)) / 2.0 * step;
    }
    acc / (hi - lo)
}

fn oracle_bd_psnr(anchor: &RdCurve, test: &RdCurve) -> f64 {
    let xs = |c: &RdCurve| {
        c.points()
            .iter()
            .map(|p| p.rate_kbps.log10())
            .collect::<Vec<_>>()
    };
    let ys = |c: &RdCurve| c.points().iter().map(|p| p.psnr_db).collect::<Vec<_>>();
    let (xa, ya) = (xs(anchor), ys(anchor));
    let (xt, yt) = (xs(test), ys(test));
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = min(&xa).max(min(&xt));
    let hi = max(&xa).min(max(&xt));
    let fa = oracle_fit(&xa, &ya);
    let ft = oracle_fit(&xt, &yt);
    trapezoid_mean(&ft, lo, hi, 100_000) - trapezoid_mean(&fa, lo, hi, 100_000)
}

fn oracle_bd_rate(anchor: &RdCurve, test: &RdCurve) -> f64 {
    let xs = |c: &RdCurve| c.points().iter().map(|p| p.psnr_db).collect::<Vec<_>>();
    let ys = |c: &RdCurve| {
        c.points()
            .iter()
            .map(|p| p.rate_kbps.log10())
            .collect::<Vec<_>>()
    };
    let (xa, ya) = (xs(anchor), ys(anchor));
    let (xt, yt) = (xs(test), ys(test));
    let min = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo = min(&xa).max(min(&xt));
    let hi = max(&xa).min(max(&xt));
    let fa = oracle_fit(&xa, &ya);
    let ft = oracle_fit(&xt, &yt);
    let avg = trapezoid_mean(&ft, lo, hi, 100_000) - trapezoid_mean(&fa, lo, hi, 100_000);
    (10f64.powf(avg) - 1.0) * 100.0
}

fn curve(points: &[(f64, f64)]) -> RdCurve {
    RdCurve::new(
        points
            .iter()
            .map(|&(r, p)| RdPoint {
                rate_kbps: r,
                psnr_db: p,
            })
            .collect(),
    )
    .unwrap()
}

/// Published motion-compensation anchor measurements (rate kbit/s, PSNR dB)
/// for a CIF sequence, ascending rate.
const ANCHOR_MEASURED: [(f64, f64); 10] = [
    (117.2604, 28.648),
    (162.2241, 29.999),
    (240.8205, 31.694),
    (349.0431, 33.333),
    (523.3041, 35.226),
    (742.2435, 37.090),
    (1111.3515, 39.148),
    (1587.3204, 41.047),
    (2349.1695, 43.006),
    (3457.9104, 45.071),
];

/// The refined-prediction measurements of the same sequence.
const TEST_MEASURED: [(f64, f64); 10] = [
    (123.2544, 29.218),
    (162.9507, 30.652),
    (238.7526, 32.301),
    (337.7844, 33.888),
    (506.6049, 35.734),
    (721.5753, 37.518),
    (1082.0250, 39.521),
    (1550.1588, 41.344),
    (2296.5135, 43.223),
    (3384.0186, 45.232),
];

#[test]
fn four_point_measured_curves_match_oracle() {
    let anchor = curve(&ANCHOR_MEASURED[3..7]);
    let test = curve(&TEST_MEASURED[3..7]);

    let rate = bd_rate(&anchor, &test).unwrap();
    let rate_oracle = oracle_bd_rate(&anchor, &test);
    assert!(
        (rate - rate_oracle).abs() < 0.01,
        "bd-rate {rate} vs oracle {rate_oracle}"
    );
    assert!(rate < 0.0, "refined curve must save rate, got {rate}");

    let quality = bd_psnr(&anchor, &test).unwrap();
    let quality_oracle = oracle_bd_psnr(&anchor, &test);
    assert!(
        (quality - quality_oracle).abs() < 0.001,
        "bd-psnr {quality} vs oracle {quality_oracle}"
    );
    assert!(quality > 0.0);
}

#[test]
fn ten_point_measured_curves_match_oracle() {
    let anchor = curve(&ANCHOR_MEASURED);
    let test = curve(&TEST_MEASURED);

    let rate = bd_rate(&anchor, &test).unwrap();
    let rate_oracle = oracle_bd_rate(&anchor, &test);
    assert!(
        (rate - rate_oracle).abs() < 0.01,
        "bd-rate {rate} vs oracle {rate_oracle}"
    );
    // The refined curve dominates over the whole measured range.
    assert!(rate < -5.0 && rate > -20.0, "got {rate}");

    let quality = bd_psnr(&anchor, &test).unwrap();
    let quality_oracle = oracle_bd_psnr(&anchor, &test);
    assert!((quality - quality_oracle).abs() < 0.001);
    assert!(quality > 0.0);
}

fn random_curve_pair(prng: &mut Prng) -> (RdCurve, RdCurve) {
    let mut anchor = Vec::new();
    let mut test = Vec::new();
    let mut rate = 60.0 + prng.next_range(100) as f64;
    let mut q = 28.0 + prng.next_range(40) as f64 / 10.0;
    for _ in 0..4 {
        let dr = 0.85 + prng.next_range(300) as f64 / 1000.0;
        let dq = 0.2 + prng.next_range(150) as f64 / 100.0;
        anchor.push((rate, q));
        test.push((
            rate * (0.8 + prng.next_range(250) as f64 / 1000.0),
            q + prng.next_range(120) as f64 / 100.0 - 0.2,
        ));
        rate *= 1.6 + dr;
        q += 1.2 + dq;
    }
    test.sort_by(|a, b| a.0.total_cmp(&b.0));
    // Quality must also increase for a plausible curve; nudge if needed.
    for i in 1..4 {
        if test[i].1 <= test[i - 1].1 {
            test[i].1 = test[i - 1].1 + 0.1;
        }
    }
    (curve(&anchor), curve(&test))
}

#[test]
fn random_curve_pairs_match_oracle() {
    let mut prng = Prng::new(0x62645f6f);
    for trial in 0..50 {
        let (anchor, test) = random_curve_pair(&mut prng);
        match (bd_rate(&anchor, &test), oracle_bd_rate(&anchor, &test)) {
            (Ok(got), want) => assert!(
                (got - want).abs() < 0.01,
                "trial {trial}: bd-rate {got} vs {want}"
            ),
            (Err(e), _) => panic!("trial {trial}: {e}"),
        }
        let got = bd_psnr(&anchor, &test).unwrap();
        let want = oracle_bd_psnr(&anchor, &test);
        assert!(
            (got - want).abs() < 0.001,
            "trial {trial}: bd-psnr {got} vs {want}"
        );
    }
}

#[test]
fn psnr_matches_two_pass_oracle() {
    let mut prng = Prng::new(0x70736e72);
    for _ in 0..10 {
        let a = Plane::from_fn(40, 30, |_, _| prng.next_byte());
        let b = Plane::from_fn(40, 30, |_, _| prng.next_byte());
        // Pass one: collect differences. Pass two: accumulate squares.
        let diffs: Vec<f64> = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f64::from(x) - f64::from(y))
            .collect();
        let mse = diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64;
        let want = 10.0 * (255.0f64 * 255.0 / mse).log10();
        let got = psnr(&Frame::mono(a, 0), &Frame::mono(b, 0)).unwrap();
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}
