//! Structural classes, focal points and canonical keys along a history.

use std::sync::Arc;

use wlc::catalog;
use wlc::stage::Stage;
use wlc::symmetry::{canonical_stage_key, focal_points, structural_classes, SymmetryConfig};

fn main() -> wlc::Result<()> {
    let cfg = SymmetryConfig::default();
    let game = Arc::new(catalog::choice_matching(4));
    let mut stage = Stage::initial(game.clone());
    for pair in [(0, 1), (1, 0), (2, 2)] {
        let classes = structural_classes(&stage, &cfg)?;
        let focal = focal_points(&stage, &cfg)?;
        println!(
            "round {}: {}  focal: {focal:?}",
            stage.round(),
            classes.dump(&game)
        );
        let (next, won) = stage.advance(pair)?;
        if won {
            println!("coordinated on {pair:?}");
            break;
        }
        stage = next;
    }

    // Stages related by a renaming share a key.
    let a = Stage::from_history(game.clone(), &[(0, 1)])?;
    let b = Stage::from_history(game, &[(3, 2)])?;
    assert_eq!(
        canonical_stage_key(&a, &cfg)?,
        canonical_stage_key(&b, &cfg)?
    );
    println!("key after one miss: {}", canonical_stage_key(&a, &cfg)?);
    Ok(())
}
