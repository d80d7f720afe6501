//! Fast invariant checks runnable from the command line.

use serde::Serialize;

use crate::coherent::SignalSign;
use crate::discrimination::{discriminate, qmin_pair_closed, qmin_triple_closed};
use crate::error::Result;
use crate::keyrate::{
    announcement_probability, devetak_winter_closed, devetak_winter_rate, loss_povm, sift_probability, Announcement,
};
use crate::linalg::HermitianOperator;
use crate::network::{derive_global_key, plan_network, reconcile_network, MuPolicy, PartyGraph};
use crate::sim::{run_session, KeyBits, SessionConfig};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, f: impl FnOnce() -> Result<(bool, String)>) -> CheckReport {
    match f() {
        Ok((passed, detail)) => CheckReport { name, passed, detail },
        Err(e) => CheckReport { name, passed: false, detail: e.to_string() },
    }
}

fn grid(n: usize, lo: f64, hi: f64) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

pub fn run_all() -> Vec<CheckReport> {
    vec![
        check("closed-form discrimination", || {
            let vacuum = qmin_pair_closed(0.0)? == 0.5 && qmin_triple_closed(0.0)? == 0.75;
            let mut ordered = true;
            for mu in grid(200, 0.005, 1.0) {
                ordered &= qmin_triple_closed(mu)? > qmin_pair_closed(mu)?;
            }
            Ok((vacuum && ordered, format!("vacuum values {vacuum}, triple > pair {ordered}")))
        }),
        check("helstrom oracle", || {
            let mut worst = 0.0f64;
            for mu in grid(50, 0.02, 2.0) {
                worst = worst.max((discriminate(mu)?.q_helstrom - 0.5 * (-4.0 * mu).exp()).abs());
            }
            Ok((worst < 1e-10, format!("max |q - exp(-4mu)/2| = {worst:.2e}")))
        }),
        check("povm completeness", || {
            let mut worst = 0.0f64;
            for mu in grid(10, 0.01, 1.0) {
                for eta in grid(10, -5.0, 0.0).map(|e| 10f64.powf(e)) {
                    let povm = loss_povm(mu, eta)?;
                    let diff = povm.sum().matrix() - HermitianOperator::identity().matrix();
                    worst = worst.max(diff.iter().map(|z| z.norm()).fold(0.0, f64::max));
                }
            }
            Ok((worst < 1e-10, format!("max entry deviation {worst:.2e}")))
        }),
        check("announcement table", || {
            let mut worst = 0.0f64;
            for mu in grid(8, 0.05, 1.0) {
                for eta in [1e-4, 0.01, 0.3, 1.0] {
                    let povm = loss_povm(mu, eta)?;
                    let c = sift_probability(mu, eta);
                    for a in SignalSign::BOTH {
                        for b in SignalSign::BOTH {
                            let p = announcement_probability(&povm, a, b, mu)?;
                            let want = if a == b { (c, 0.0) } else { (0.0, c) };
                            worst = worst.max((p.plus - want.0).abs()).max((p.minus - want.1).abs());
                        }
                    }
                }
            }
            Ok((worst < 1e-10, format!("max deviation {worst:.2e}")))
        }),
        check("entropy pipeline vs closed form", || {
            let mut worst = 0.0f64;
            for mu in grid(8, 0.01, 1.0) {
                for eta in [1e-5, 1e-3, 0.1, 1.0] {
                    let r = devetak_winter_rate(&loss_povm(mu, eta)?, Announcement::Plus, 0.0)?;
                    worst = worst.max((r - devetak_winter_closed(mu, eta, 0.0)).abs());
                }
            }
            Ok((worst < 1e-9, format!("max deviation {worst:.2e}")))
        }),
        check("noiseless session", || {
            let cfg = SessionConfig { y0: 0.0, dark_count_prob: 0.0, seed: 1, ..SessionConfig::symmetric(0.2, 0.0, 20_000) };
            let r = run_session(&cfg)?;
            let agree = r.agree().all_agree();
            Ok((r.qber_ab == 0.0 && r.qber_bc == 0.0 && agree, format!("qber {} / {}, keys agree {agree}", r.qber_ab, r.qber_bc)))
        }),
        check("network reconciliation", || {
            let g = PartyGraph::from_edges(&[(1, 3, 10.0), (2, 3, 14.0), (3, 4, 8.0), (4, 5, 9.0), (5, 6, 7.0), (5, 7, 11.0)]);
            let plan = plan_network(&g, &MuPolicy::Fixed(0.2), 0.0)?;
            let keys: Vec<KeyBits> = (0..plan.segments.len())
                .map(|i| KeyBits::new((0..32).map(|j| (i * 7 + j * 3) % 5 < 2).collect()))
                .collect();
            let rec = reconcile_network(&keys, &plan)?;
            let mut ok = plan.segments.len() == 3;
            for (i, k) in keys.iter().enumerate() {
                ok &= derive_global_key(i, k, &rec.announcements, &plan)? == rec.global_key;
            }
            Ok((ok, format!("{} segments, centers {:?}", plan.segments.len(), plan.intra_announcers)))
        }),
    ]
}
