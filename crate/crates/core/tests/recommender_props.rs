use std::collections::HashSet;

use proptest::prelude::*;
use raga_moodkit::catalog::Rasa;
use raga_moodkit::recommender::{recommend_transition, ScoredLibrary, ScoredSong};

fn library_strategy() -> impl Strategy<Value = ScoredLibrary> {
    prop::collection::vec(prop::array::uniform6(0u8..20), 1..25).prop_map(|raw| ScoredLibrary {
        songs: raw
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                // coarse values so ties actually happen
                let total: f64 = s.iter().map(|&v| v as f64 + 1.0).sum();
                ScoredSong {
                    id: format!("song{:03}", (i * 7919) % 1000),
                    scores: s.map(|v| (v as f64 + 1.0) / total),
                }
            })
            .collect(),
    })
}

fn rasa_strategy() -> impl Strategy<Value = Rasa> {
    (0usize..6).prop_map(|i| Rasa::ALL[i])
}

/// Straight greedy scan over every unused song, ties to the smaller id.
fn oracle(lib: &ScoredLibrary, from: Rasa, to: Rasa, length: usize) -> Vec<String> {
    let len = length.min(lib.songs.len());
    let mut used = vec![false; lib.songs.len()];
    let mut out = Vec::new();
    for i in 0..len {
        let w = if len == 1 { 1.0 } else { i as f64 / (len - 1) as f64 };
        let mut best: Option<(f64, &str, usize)> = None;
        for (j, s) in lib.songs.iter().enumerate() {
            if used[j] {
                continue;
            }
            let v = (1.0 - w) * s.scores[from.index()] + w * s.scores[to.index()];
            let better = match best {
                None => true,
                Some((bv, bid, _)) => v > bv || (v == bv && s.id.as_str() < bid),
            };
            if better {
                best = Some((v, &s.id, j));
            }
        }
        let (_, id, j) = best.unwrap();
        used[j] = true;
        out.push(id.to_string());
    }
    out
}

proptest! {
    #[test]
    fn playlist_properties(lib in library_strategy(), from in rasa_strategy(), to in rasa_strategy(), length in 1usize..12) {
        let p = recommend_transition(&lib, from, to, length).unwrap();
        let n = lib.songs.len();
        prop_assert_eq!(p.slots.len(), length.min(n));
        let ids: HashSet<&str> = p.slots.iter().map(|s| s.song_id.as_str()).collect();
        prop_assert_eq!(ids.len(), p.slots.len());
        for (i, s) in p.slots.iter().enumerate() {
            prop_assert_eq!(s.rank, i + 1);
        }

        let score = |id: &str, r: Rasa| lib.songs.iter().find(|s| s.id == id).unwrap().scores[r.index()];
        let first = &p.slots[0];
        if p.slots.len() > 1 {
            let best_current = lib.songs.iter().map(|s| s.scores[from.index()]).fold(f64::MIN, f64::max);
            prop_assert_eq!(score(&first.song_id, from), best_current);
        }
        let last = p.slots.last().unwrap();
        let best_remaining = lib
            .songs
            .iter()
            .filter(|s| s.id == last.song_id || !ids.contains(s.id.as_str()))
            .map(|s| s.scores[to.index()])
            .fold(f64::MIN, f64::max);
        prop_assert_eq!(score(&last.song_id, to), best_remaining);
        prop_assert_eq!(last.weight, 1.0);

        if length <= 8 {
            let got: Vec<String> = p.slots.iter().map(|s| s.song_id.clone()).collect();
            prop_assert_eq!(got, oracle(&lib, from, to, length));
        }
    }
}
