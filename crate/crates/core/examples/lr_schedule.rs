//! The default warmup and cosine schedule, sampled once per epoch.

use alwig::tensor::LrSchedule;

pub fn run_example() -> alwig::Result<()> {
    let s = LrSchedule::default();
    s.validate()?;
    println!(
        "warmup {} epochs to {:e}, cosine to {:e} at epoch {}",
        s.warmup_epochs, s.peak_lr, s.final_lr, s.total_epochs
    );
    for epoch in (0..=s.total_epochs).step_by(5) {
        let lr = s.lr_at(epoch as f64)?;
        let bar = "#".repeat((lr / s.peak_lr * 40.0).round() as usize);
        println!("epoch {epoch:2}  lr {lr:.3e}  {bar}");
    }
    assert_eq!(s.lr_at(0.0)?, 0.0);
    assert!((s.lr_at(s.warmup_epochs as f64)? - s.peak_lr).abs() < 1e-18);
    assert!((s.lr_at(s.total_epochs as f64)? - s.final_lr).abs() < 1e-18);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
