//! Pairing clients by their self-evaluation vectors.

use fedcme::server::{cosine_similarity, make_matching, make_matching_many_to_one};
use fedcme::Result;

fn main() -> Result<()> {
    let names = ["A", "B", "C", "D", "E"];
    let vectors = vec![
        vec![1.0, 0.0],
        vec![0.0, 1.0],
        vec![0.9, 0.1],
        vec![0.1, 0.9],
        vec![0.5, 0.5],
    ];
    for i in 0..vectors.len() {
        let row: Vec<String> = vectors
            .iter()
            .map(|v| Ok(format!("{:.3}", cosine_similarity(&vectors[i], v)?)))
            .collect::<Result<_>>()?;
        println!("{}  {}", names[i], row.join("  "));
    }

    let four = make_matching(&[0, 1, 2, 3], &vectors)?;
    println!("pairwise, A..D: {:?}", four.pairs());

    let five = make_matching(&[0, 1, 2, 3, 4], &vectors)?;
    println!(
        "pairwise, A..E: {:?}, unmatched {:?}",
        five.pairs(),
        five.unmatched
    );

    // cold start: nobody has reported yet, so all similarities are 0
    let zeros = vec![vec![0.0; 2]; 5];
    println!(
        "cold start: {:?}",
        make_matching(&[0, 1, 2, 3, 4], &zeros)?.pairs()
    );

    let mto = make_matching_many_to_one(&[0, 1, 2, 3, 4], &vectors)?;
    for (k, j) in &mto.counterpart {
        println!("many-to-one: {} takes from {}", names[*k], names[*j]);
    }
    Ok(())
}
