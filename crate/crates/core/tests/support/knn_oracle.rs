//! Brute-force k-NN over the raw CSV, written without the library's model.

use std::path::Path;

pub struct Point {
    pub features: [f64; 4],
    pub label: String,
}

/// Rows of the Iris CSV in file order.
pub fn load_iris(csv_path: &Path) -> Vec<Point> {
    let mut reader = csv::Reader::from_path(csv_path).unwrap();
    reader
        .records()
        .map(|r| {
            let r = r.unwrap();
            let f = |i: usize| r[i].parse::<f64>().unwrap();
            Point {
                features: [f(0), f(1), f(2), f(3)],
                label: r[4].to_string(),
            }
        })
        .collect()
}

fn squared(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut total = 0.0;
    for i in 0..4 {
        total += (a[i] - b[i]) * (a[i] - b[i]);
    }
    total
}

/// Everyone at or inside the k-th smallest distance votes; the label with
/// most votes wins; among tied labels the one owning the closest voter wins,
/// earlier rows breaking equal distances.
pub fn classify(points: &[Point], k: usize, probe: &[f64; 4]) -> String {
    let d: Vec<f64> = points.iter().map(|p| squared(&p.features, probe)).collect();
    let mut sorted = d.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let radius = sorted[k.min(points.len()) - 1];

    let mut labels: Vec<&str> = Vec::new();
    let mut votes: Vec<usize> = Vec::new();
    let mut closest: Vec<(f64, usize)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if d[i] > radius {
            continue;
        }
        let slot = match labels.iter().position(|l| *l == p.label) {
            Some(s) => s,
            None => {
                labels.push(&p.label);
                votes.push(0);
                closest.push((f64::INFINITY, usize::MAX));
                labels.len() - 1
            }
        };
        votes[slot] += 1;
        if (d[i], i) < closest[slot] {
            closest[slot] = (d[i], i);
        }
    }
    let top = *votes.iter().max().unwrap();
    let mut best: Option<usize> = None;
    for s in 0..labels.len() {
        if votes[s] == top && best.is_none_or(|b| closest[s] < closest[b]) {
            best = Some(s);
        }
    }
    labels[best.unwrap()].to_string()
}
