use std::time::Instant;

use imd_core::toy::gradcheck::default_gradcheck;
use imd_core::toy::train::{evaluate_conditioning, train, ConditionKind, TrainConfig};

#[test]
fn gradients_match_finite_differences() {
    let t = Instant::now();
    let r = default_gradcheck().unwrap();
    for g in &r.groups {
        println!("{:>8} n={:>5} max_rel_err={:.3e}", g.name, g.count, g.max_rel_err);
    }
    assert!(r.passed());
    println!("gradcheck {:?}", t.elapsed());
}

#[test]
fn training_halves_loss_and_complete_condition_wins() {
    let cfg = TrainConfig::default();
    let t = Instant::now();
    let (model, sched, report) = train(&cfg).unwrap();
    println!(
        "train {:?} initial {:?} final {:?}",
        t.elapsed(),
        report.initial,
        report.final_loss
    );
    assert!(report.final_loss.total <= 0.5 * report.initial.total);
    let t = Instant::now();
    let ev = evaluate_conditioning(&model, &sched, &cfg, 100, 11).unwrap();
    println!("eval {:?} {:?}", t.elapsed(), ev.mean_iou);
    assert!(ev.get(ConditionKind::Complete).unwrap() >= ev.get(ConditionKind::Partial).unwrap());
}
