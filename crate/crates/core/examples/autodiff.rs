//! Reverse-mode gradients on a small least-squares problem, checked against
//! a central difference, then fitted with AdamW.

use alwig::tensor::{adamw_step, Graph, OptimizerState, ParamStore, Tensor, Var};

fn loss(g: &mut Graph, p: &ParamStore, x: &Tensor, y: &Tensor) -> alwig::Result<Var> {
    let w = g.bind(p, "w")?;
    let b = g.bind(p, "b")?;
    let x = g.constant(x.clone());
    let y = g.constant(y.clone());
    let xw = g.matmul(x, w)?;
    let pred = g.add_row(xw, b)?;
    let err = g.sub(pred, y)?;
    let sq = g.mul(err, err)?;
    Ok(g.mean(sq))
}

pub fn run_example() -> alwig::Result<()> {
    // y = 2 x0 - x1 + 0.5
    let x = Tensor::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0], vec![2.0, -1.0]])?;
    let y = Tensor::from_rows(&[vec![-0.5], vec![2.5], vec![1.5], vec![5.5]])?;
    let mut p = ParamStore::new();
    p.insert("w", Tensor::zeros(&[2, 1]));
    p.insert("b", Tensor::zeros(&[1]));

    let mut g = Graph::new();
    let l = loss(&mut g, &p, &x, &y)?;
    let grads = g.backward(l)?.params();
    let h = 1e-5;
    let mut plus = p.clone();
    plus.get_mut("w").unwrap().data_mut()[0] += h;
    let mut minus = p.clone();
    minus.get_mut("w").unwrap().data_mut()[0] -= h;
    let fd = {
        let mut g1 = Graph::new();
        let a = loss(&mut g1, &plus, &x, &y)?;
        let mut g2 = Graph::new();
        let b = loss(&mut g2, &minus, &x, &y)?;
        (g1.scalar(a) - g2.scalar(b)) / (2.0 * h)
    };
    println!(
        "dL/dw0: reverse mode {:.6}, central difference {fd:.6}",
        grads["w"].data()[0]
    );

    let mut state = OptimizerState::new(0.0);
    let mut last = f64::INFINITY;
    for step in 0..=1000 {
        let mut g = Graph::new();
        let l = loss(&mut g, &p, &x, &y)?;
        last = g.scalar(l);
        if step % 250 == 0 {
            println!("step {step:4}  loss {last:.6}");
        }
        let grads = g.backward(l)?.params();
        adamw_step(&mut p, &grads, &mut state, 0.05)?;
    }
    println!(
        "w = {:?}, b = {:?}",
        p.get("w").unwrap().data(),
        p.get("b").unwrap().data()
    );
    assert!(last < 1e-3, "loss {last}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
