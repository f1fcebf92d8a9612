//! Dual (line) graph of the complete graph: size, regularity, index maps.
//!
//! cargo run --example dual_graph -- 268

use stpgsr::graph::{build_dual_complete, dual_index, dual_pair};

fn main() -> stpgsr::Result<()> {
    let n: usize = std::env::args().nth(1).map_or(Ok(10), |s| s.parse()).expect("n must be an integer");
    let dual = build_dual_complete(n)?;
    let degrees = dual.degrees();
    println!("K_{n}: {} dual nodes, {} dual edges", dual.m(), dual.dual_edges().len());
    println!("degree range {}..={}", degrees.iter().min().unwrap(), degrees.iter().max().unwrap());
    println!("density {:.3}%, edge list {:.1} MB", dual.density() * 100.0, dual.edge_bytes() as f64 / 1e6);

    if n >= 3 {
        let r = dual_index(1, 2, n)?;
        println!("primal edge (1, 2) is dual node {r}; dual node {r} is {:?}", dual_pair(r, n)?);
    }
    Ok(())
}
