//! Shapiro-Wilk W test (Royston's AS R94 approximation).

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ShapiroWilk {
    pub w: f64,
    pub p_value: f64,
}

/// W statistic and p-value for `3 <= n <= 5000` observations.
pub fn shapiro_wilk(x: &[f64]) -> Result<ShapiroWilk> {
    let n = x.len();
    if !(3..=5000).contains(&n) {
        return Err(Error::SampleSizeOutOfRange(n));
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let range = v[n - 1] - v[0];
    if range.is_nan() || range <= 0.0 {
        return Err(Error::ConstantColumn(0));
    }
    let an = n as f64;
    let half = n / 2;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    // coefficients a[1..=half], positive
    let mut a = vec![0.0; half + 1];
    if n == 3 {
        a[1] = std::f64::consts::FRAC_1_SQRT_2;
    } else {
        let an25 = an + 0.25;
        let m: Vec<f64> = (0..=half)
            .map(|i| if i == 0 { 0.0 } else { std_normal.inverse_cdf((i as f64 - 0.375) / an25) })
            .collect();
        let summ2 = 2.0 * m[1..].iter().map(|v| v * v).sum::<f64>();
        let ssumm2 = summ2.sqrt();
        let rsn = 1.0 / an.sqrt();
        let a1 = poly(&C1, rsn) - m[1] / ssumm2;
        let (first, fac) = if n > 5 {
            let a2 = -m[2] / ssumm2 + poly(&C2, rsn);
            a[2] = a2;
            let fac = ((summ2 - 2.0 * m[1] * m[1] - 2.0 * m[2] * m[2])
                / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
                .sqrt();
            (3, fac)
        } else {
            (2, ((summ2 - 2.0 * m[1] * m[1]) / (1.0 - 2.0 * a1 * a1)).sqrt())
        };
        a[1] = a1;
        for i in first..=half {
            a[i] = -m[i] / fac;
        }
    }

    // work on range-scaled data for stability
    let z: Vec<f64> = v.iter().map(|t| (t - v[0]) / range).collect();
    let mean = z.iter().sum::<f64>() / an;
    let ss: f64 = z.iter().map(|t| (t - mean).powi(2)).sum();
    let num: f64 = (1..=half).map(|i| a[i] * (z[n - i] - z[i - 1])).sum();
    let w = (num * num / ss).min(1.0);

    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::PI / 3.0;
        let p = (pi6 * (w.sqrt().asin() - stqr)).max(0.0);
        return Ok(ShapiroWilk { w, p_value: p.min(1.0) });
    }
    let mut w1 = (1.0 - w).ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if w1 >= gamma {
            return Ok(ShapiroWilk { w, p_value: 1e-99 });
        }
        w1 = -(gamma - w1).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    let p = if w1 == f64::NEG_INFINITY {
        1.0
    } else {
        1.0 - std_normal.cdf((w1 - m) / s)
    };
    Ok(ShapiroWilk { w, p_value: p })
}
