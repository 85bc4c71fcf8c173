use crate::fingerprint::{hamming, PHash64};

#[derive(Clone, Debug)]
struct Node {
    hash: PHash64,
    /// `(distance to this node, child index)`.
    children: Vec<(u32, usize)>,
}

/// BK-tree over perceptual hashes under the Hamming metric. Each distinct
/// hash is stored once.
#[derive(Clone, Debug, Default)]
pub struct HammingIndex {
    nodes: Vec<Node>,
}

impl HammingIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Returns false if the hash was already present.
    pub fn insert(&mut self, hash: PHash64) -> bool {
        if self.nodes.is_empty() {
            self.nodes.push(Node {
                hash,
                children: Vec::new(),
            });
            return true;
        }
        let mut cur = 0;
        loop {
            let d = hamming(self.nodes[cur].hash, hash);
            if d == 0 {
                return false;
            }
            match self.nodes[cur].children.iter().find(|(cd, _)| *cd == d) {
                Some(&(_, next)) => cur = next,
                None => {
                    let idx = self.nodes.len();
                    self.nodes.push(Node {
                        hash,
                        children: Vec::new(),
                    });
                    self.nodes[cur].children.push((d, idx));
                    return true;
                }
            }
        }
    }

    /// Stored hashes within `radius` of `hash` with their distances,
    /// ascending by distance then by value.
    pub fn query(&self, hash: PHash64, radius: u32) -> Vec<(u32, PHash64)> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            let d = hamming(node.hash, hash);
            if d <= radius {
                out.push((d, node.hash));
            }
            let lo = d.saturating_sub(radius);
            let hi = d + radius;
            stack.extend(
                node.children
                    .iter()
                    .filter(|(cd, _)| (lo..=hi).contains(cd))
                    .map(|&(_, c)| c),
            );
        }
        out.sort_unstable();
        out
    }
}

impl FromIterator<PHash64> for HammingIndex {
    fn from_iter<I: IntoIterator<Item = PHash64>>(iter: I) -> Self {
        let mut index = HammingIndex::new();
        for h in iter {
            index.insert(h);
        }
        index
    }
}

/// Hashes within distance `d` of `h`, nearest first.
pub fn query_near(index: &HammingIndex, h: PHash64, d: u32) -> Vec<PHash64> {
    index.query(h, d).into_iter().map(|(_, h)| h).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_and_exact() {
        let idx = HammingIndex::new();
        assert!(query_near(&idx, PHash64(5), 10).is_empty());
        let idx: HammingIndex = [PHash64(5)].into_iter().collect();
        assert_eq!(query_near(&idx, PHash64(5), 0), vec![PHash64(5)]);
    }

    #[test]
    fn ordering_by_distance_then_value() {
        let idx: HammingIndex = [0b0000, 0b0011, 0b0001, 0b1000, 0b0001]
            .into_iter()
            .map(PHash64)
            .collect();
        assert_eq!(idx.len(), 4);
        let got = query_near(&idx, PHash64(0), 2);
        assert_eq!(got, [0b0000, 0b0001, 0b1000, 0b0011].map(PHash64));
    }
}
