//! Key-rate stack against 100 random points evaluated at 50 digits.

use fsochan::qkd::*;

const TABLE: &str = include_str!("data/qkd_oracle.csv");

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a / b - 1.0).abs()
    }
}

#[test]
fn matches_reference_table() {
    let mut lines = TABLE.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 13);
    let mut rows = 0;
    let mut worst = 0.0f64;
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        let p = DecoyParams {
            mu_s: v[0],
            mu_d: v[1],
            y0: v[2],
            e_det: v[3],
            f: v[4],
            eta_d: v[5],
        };
        let (eta, x) = (v[6], v[7]);
        let got = [
            binary_entropy(x),
            gain(eta, p.mu_s, &p),
            qber(eta, p.mu_s, &p),
            one_photon_gain_lower(eta, &p).unwrap(),
            key_rate_integrand(eta, &p).unwrap(),
        ];
        for (i, (&g, &e)) in got.iter().zip(&v[8..]).enumerate() {
            let r = rel(g, e);
            worst = worst.max(r);
            assert!(r < 1e-12, "row {rows} column {}: {g:e} vs {e:e} (rel {r:e})", header[8 + i]);
        }
        rows += 1;
    }
    assert_eq!(rows, 100);
    eprintln!("worst relative deviation {worst:e}");
}
