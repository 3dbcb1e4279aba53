//! The four relation penalty kinds, their values and gradients.
//!
//! ```bash
//! cargo run --example penalty_functions
//! ```

use kgretro::penalty::{init_params, penalty_gradients, penalty_value};
use kgretro::{RelationKind, RelationParams};
use nalgebra::{dmatrix, dvector, DMatrix};

fn main() -> kgretro::Result<()> {
    let qi = dvector![1.0, 0.5];
    let qj = dvector![0.2, -1.0];

    for kind in [RelationKind::Identity, RelationKind::Translation, RelationKind::Linear, RelationKind::Neural] {
        let mut p = init_params("r", kind, 2, 2, 1)?;
        if kind.learns_offset() {
            p.b = dvector![0.3, 0.3];
        }
        if kind == RelationKind::Linear {
            p.a = dmatrix![0.0, -1.0; 1.0, 0.0];
        }
        let f = penalty_value(&p, &qi, &qj)?;
        let g = penalty_gradients(&p, &qi, &qj)?;
        println!("{:<12} f = {f:>8.4}   ∂f/∂q_i = {:?}", kind.to_string(), g.d_qi.as_slice());
    }

    // antonymy: A = −I is minimized when the two vectors point in opposite directions
    let anti = RelationParams {
        rel: "antonym".into(),
        kind: RelationKind::Linear,
        a: -DMatrix::identity(2, 2),
        b: dvector![0.0, 0.0],
    };
    println!("\nantonym penalty at (q, −q): {}", penalty_value(&anti, &qi, &(-&qi))?);
    println!("antonym penalty at (q,  q): {}", penalty_value(&anti, &qi, &qi)?);
    Ok(())
}
