//! Census of all nontrivial 3-choice games.

use wlc::enumeration::{run_census, CensusConfig};

fn main() -> wlc::Result<()> {
    let census = run_census(3, &CensusConfig::default())?;
    for e in &census.entries {
        println!(
            "{:?}  optimal {:.6}  gct {}  wm {}  focal {}",
            e.game.edges(),
            e.ect_or_bound(),
            e.optimal_gct.as_deref().unwrap_or("-"),
            e.wm_ect,
            e.has_focal_point
        );
    }
    let (best, witnesses) = census.greatest(1e-9);
    println!(
        "greatest {best:.9} at {:?}",
        witnesses.iter().map(|w| w.game.edges()).collect::<Vec<_>>()
    );
    print!("{}", census.to_csv()?);
    Ok(())
}
