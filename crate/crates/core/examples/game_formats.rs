//! Reading and writing games as edge lists and JSON.

use wlc::game::{parse_game, serialize_game, Game};

fn main() -> wlc::Result<()> {
    let text = "# the Z game\nleft 3\nright 3\nedge 0 0\nedge 1 0\nedge 2 1\nedge 2 2\n";
    let game = parse_game(text)?;
    println!(
        "{} x {} with {} winning pairs",
        game.left_count(),
        game.right_count(),
        game.edge_count()
    );
    println!("{}", serialize_game(&game));
    let json = game.to_json();
    println!("{json}");
    assert_eq!(Game::from_json(&json)?, game);

    match parse_game("left 2\nright 2\nedge 0 0\n") {
        Err(e) => println!("rejected: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
