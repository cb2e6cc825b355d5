use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::label_map::LabelMap;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    /// 2D edge neighbours.
    Four,
    /// 2D edge and corner neighbours.
    Eight,
    /// 3D face neighbours.
    Six,
    /// 3D face, edge and corner neighbours.
    TwentySix,
}

impl Connectivity {
    pub fn default_for(rank: usize) -> Self {
        if rank == 3 {
            Connectivity::TwentySix
        } else {
            Connectivity::Eight
        }
    }

    pub fn rank(self) -> usize {
        match self {
            Connectivity::Four | Connectivity::Eight => 2,
            Connectivity::Six | Connectivity::TwentySix => 3,
        }
    }

    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::InvalidArgument(format!(
                "connectivity must be 4 or 8 (2D), 6 or 26 (3D); got {n}"
            ))),
        }
    }

    /// Neighbour offsets in coordinate space.
    fn offsets(self) -> Vec<Vec<isize>> {
        let rank = self.rank();
        let full = matches!(self, Connectivity::Eight | Connectivity::TwentySix);
        let mut out = Vec::new();
        let total = 3usize.pow(rank as u32);
        for code in 0..total {
            let mut c = code;
            let off: Vec<isize> = (0..rank)
                .map(|_| {
                    let d = (c % 3) as isize - 1;
                    c /= 3;
                    d
                })
                .collect();
            let nonzero = off.iter().filter(|&&d| d != 0).count();
            if nonzero == 0 || (!full && nonzero != 1) {
                continue;
            }
            out.push(off);
        }
        out
    }
}

/// One maximal connected same-label foreground region.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectComponent {
    pub id: usize,
    pub label: u8,
    /// Dims of the map the component was taken from.
    pub dims: Vec<usize>,
    /// Flat row-major indices, ascending.
    pub indices: Vec<usize>,
}

impl ObjectComponent {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn coords(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        self.indices.iter().map(move |&i| {
            let mut idx = i;
            let mut out = vec![0; self.dims.len()];
            for (slot, &d) in out.iter_mut().zip(&self.dims).rev() {
                *slot = idx % d;
                idx /= d;
            }
            out
        })
    }

    /// Smallest pixel in row-major order.
    pub fn anchor(&self) -> Vec<usize> {
        self.coords().next().unwrap_or_default()
    }
}

/// Labels maximal same-label foreground regions. Components are numbered
/// in order of their smallest row-major pixel.
pub fn connected_components(map: &LabelMap, connectivity: Connectivity) -> Result<Vec<ObjectComponent>> {
    let dims = map.dims();
    if connectivity.rank() != dims.len() {
        return Err(Error::InvalidArgument(format!(
            "{connectivity:?} connectivity does not apply to a {}D map",
            dims.len()
        )));
    }
    let offsets = connectivity.offsets();
    let labels = map.labels();
    let mut visited = vec![false; labels.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    let mut coord = vec![0usize; dims.len()];

    for start in 0..labels.len() {
        let label = labels[start];
        if label == 0 || visited[start] {
            continue;
        }
        visited[start] = true;
        queue.push_back(start);
        let mut indices = Vec::new();
        while let Some(i) = queue.pop_front() {
            indices.push(i);
            let mut rem = i;
            for (slot, &d) in coord.iter_mut().zip(dims).rev() {
                *slot = rem % d;
                rem /= d;
            }
            'next: for off in &offsets {
                let mut j = 0usize;
                for ((&c, &o), &d) in coord.iter().zip(off).zip(dims) {
                    let n = c as isize + o;
                    if n < 0 || n as usize >= d {
                        continue 'next;
                    }
                    j = j * d + n as usize;
                }
                if !visited[j] && labels[j] == label {
                    visited[j] = true;
                    queue.push_back(j);
                }
            }
        }
        indices.sort_unstable();
        out.push(ObjectComponent {
            id: out.len(),
            label,
            dims: dims.to_vec(),
            indices,
        });
    }
    Ok(out)
}
