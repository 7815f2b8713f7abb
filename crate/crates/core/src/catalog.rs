//! Named games that recur in examples, tests and reports.

use crate::game::{make_choice_matching, Game};

fn build(left: usize, right: usize, edges: &[(usize, usize)]) -> Game {
    Game::new(left, right, edges.iter().copied()).expect("catalog games are valid")
}

/// `CM_m`, panicking on `m = 0`.
pub fn choice_matching(m: usize) -> Game {
    make_choice_matching(m).expect("m >= 1")
}

/// Two leaves on one hub plus a hub with two leaves: L0-R0, L1-R0, L2-R1, L2-R2.
pub fn z_game() -> Game {
    build(3, 3, &[(0, 0), (1, 0), (2, 1), (2, 2)])
}

/// The bipartite 6-cycle on three choices per player.
pub fn c6_game() -> Game {
    build(3, 3, &[(0, 0), (0, 1), (1, 0), (1, 2), (2, 1), (2, 2)])
}

/// The eight 3-choice games without a choice of degree 3, in atlas order.
pub fn three_choice_atlas() -> Vec<(&'static str, Game)> {
    vec![
        ("CM_3", build(3, 3, &[(0, 0), (1, 1), (2, 2)])),
        ("K2 + P3", build(2, 3, &[(0, 0), (1, 1), (1, 2)])),
        ("P5", build(2, 3, &[(0, 0), (0, 1), (1, 1), (1, 2)])),
        ("K2 + P4", build(3, 3, &[(0, 0), (1, 1), (1, 2), (2, 2)])),
        ("P6", build(3, 3, &[(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)])),
        (
            "K2 + C4",
            build(3, 3, &[(0, 0), (1, 1), (1, 2), (2, 1), (2, 2)]),
        ),
        ("C6", c6_game()),
        ("Z", z_game()),
    ]
}

/// The six 5-choice games in which each player has exactly one choice of
/// degree 3, the two are not adjacent, and every degree is at most 3. Only
/// the first has no focal point.
pub fn degree_three_specials() -> Vec<Game> {
    vec![
        build(
            5,
            5,
            &[
                (0, 0),
                (0, 1),
                (1, 1),
                (2, 1),
                (3, 2),
                (3, 3),
                (3, 4),
                (4, 4),
            ],
        ),
        build(
            5,
            4,
            &[(0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (4, 3)],
        ),
        build(
            5,
            4,
            &[
                (0, 0),
                (1, 0),
                (2, 0),
                (2, 1),
                (3, 1),
                (3, 2),
                (3, 3),
                (4, 3),
            ],
        ),
        build(
            5,
            5,
            &[(0, 0), (1, 0), (2, 0), (3, 1), (3, 2), (3, 3), (4, 4)],
        ),
        build(
            5,
            5,
            &[
                (0, 0),
                (1, 0),
                (2, 0),
                (2, 1),
                (3, 1),
                (3, 2),
                (3, 3),
                (4, 4),
            ],
        ),
        build(
            5,
            5,
            &[
                (0, 0),
                (1, 0),
                (2, 0),
                (3, 1),
                (3, 2),
                (3, 3),
                (4, 3),
                (4, 4),
            ],
        ),
    ]
}

/// The 5-choice game with one degree-4 choice per player and all other
/// degrees 1.
pub fn degree_four_special() -> Game {
    build(
        5,
        5,
        &[
            (0, 0),
            (0, 1),
            (0, 2),
            (0, 3),
            (1, 4),
            (2, 4),
            (3, 4),
            (4, 4),
        ],
    )
}

/// Focal-point-free 5-choice games made of disjoint paths and cycles, as
/// usually listed: CM_5, 2K2 + P3 + P3', 2K2 + C6 and P5 + P5'.
pub fn paths_and_cycles_listed() -> Vec<Game> {
    vec![
        build(5, 5, &[(0, 0), (1, 1), (2, 2), (3, 3), (4, 4)]),
        build(5, 5, &[(0, 0), (1, 1), (2, 2), (3, 2), (4, 3), (4, 4)]),
        build(
            5,
            5,
            &[
                (0, 0),
                (1, 1),
                (2, 2),
                (2, 3),
                (3, 2),
                (3, 4),
                (4, 3),
                (4, 4),
            ],
        ),
        build(
            5,
            5,
            &[
                (0, 0),
                (1, 0),
                (1, 1),
                (2, 1),
                (3, 2),
                (3, 3),
                (4, 3),
                (4, 4),
            ],
        ),
    ]
}

/// Resolves a builtin game name: `cm:<m>`, `z`, `c6`, `d3:<i>` (the
/// degree-three specials, 0-based) or `d4`.
pub fn by_name(name: &str) -> Option<Game> {
    let (head, arg) = name
        .split_once(':')
        .map_or((name, None), |(h, a)| (h, Some(a)));
    let index = || arg.and_then(|a| a.parse::<usize>().ok());
    match head {
        "cm" => index().filter(|&m| m >= 1).map(choice_matching),
        "z" => Some(z_game()),
        "c6" => Some(c6_game()),
        "d3" => index().and_then(|i| degree_three_specials().into_iter().nth(i)),
        "d4" => Some(degree_four_special()),
        _ => None,
    }
}
