//! Fixed-capacity uniform experience replay.
//!
//! Column storage: one flat array per transition field, indexed as a ring.
//! Sampling is uniform with replacement.

use rand::{Rng, RngCore};

use crate::nnet::Matrix;

/// One environment interaction. `d` is the terminal flag only — time-limit
/// truncation is not stored as done.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub s: Vec<f64>,
    pub a: Vec<f64>,
    pub r: f64,
    pub s_next: Vec<f64>,
    pub d: bool,
}

/// Column-stacked transitions; every row is one sampled transition.
#[derive(Clone, Debug)]
pub struct Batch {
    pub s: Matrix,
    pub a: Matrix,
    pub r: Vec<f64>,
    pub s_next: Matrix,
    pub d: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.r.len()
    }

    pub fn is_empty(&self) -> bool {
        self.r.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    obs_dim: usize,
    act_dim: usize,
    size: usize,
    insert_cursor: usize,
    s: Vec<f64>,
    a: Vec<f64>,
    r: Vec<f64>,
    s_next: Vec<f64>,
    d: Vec<f64>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, obs_dim: usize, act_dim: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        assert!(obs_dim > 0 && act_dim > 0, "replay dims must be positive");
        ReplayBuffer {
            capacity,
            obs_dim,
            act_dim,
            size: 0,
            insert_cursor: 0,
            s: vec![0.0; capacity * obs_dim],
            a: vec![0.0; capacity * act_dim],
            r: vec![0.0; capacity],
            s_next: vec![0.0; capacity * obs_dim],
            d: vec![0.0; capacity],
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    pub fn store(&mut self, t: &Transition) {
        assert_eq!(t.s.len(), self.obs_dim, "observation dim mismatch");
        assert_eq!(t.s_next.len(), self.obs_dim, "next-observation dim mismatch");
        assert_eq!(t.a.len(), self.act_dim, "action dim mismatch");
        assert!(t.r.is_finite(), "non-finite reward");
        let i = self.insert_cursor;
        self.s[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s);
        self.a[i * self.act_dim..(i + 1) * self.act_dim].copy_from_slice(&t.a);
        self.r[i] = t.r;
        self.s_next[i * self.obs_dim..(i + 1) * self.obs_dim].copy_from_slice(&t.s_next);
        self.d[i] = if t.d { 1.0 } else { 0.0 };
        self.insert_cursor = (i + 1) % self.capacity;
        self.size = (self.size + 1).min(self.capacity);
    }

    /// Read back the transition in storage slot `index` (0 ≤ index < size).
    pub fn get(&self, index: usize) -> Transition {
        assert!(index < self.size, "replay index out of range");
        Transition {
            s: self.s[index * self.obs_dim..(index + 1) * self.obs_dim].to_vec(),
            a: self.a[index * self.act_dim..(index + 1) * self.act_dim].to_vec(),
            r: self.r[index],
            s_next: self.s_next[index * self.obs_dim..(index + 1) * self.obs_dim].to_vec(),
            d: self.d[index] != 0.0,
        }
    }

    pub fn sample_batch(&self, rng: &mut dyn RngCore, batch_size: usize) -> Batch {
        assert!(self.size > 0, "cannot sample from an empty replay buffer");
        assert!(batch_size > 0, "batch size must be positive");
        let mut s = Matrix::zeros(batch_size, self.obs_dim);
        let mut a = Matrix::zeros(batch_size, self.act_dim);
        let mut s_next = Matrix::zeros(batch_size, self.obs_dim);
        let mut r = vec![0.0; batch_size];
        let mut d = vec![0.0; batch_size];
        for row in 0..batch_size {
            let i = rng.random_range(0..self.size);
            s.row_mut(row).copy_from_slice(&self.s[i * self.obs_dim..(i + 1) * self.obs_dim]);
            a.row_mut(row).copy_from_slice(&self.a[i * self.act_dim..(i + 1) * self.act_dim]);
            s_next
                .row_mut(row)
                .copy_from_slice(&self.s_next[i * self.obs_dim..(i + 1) * self.obs_dim]);
            r[row] = self.r[i];
            d[row] = self.d[i];
        }
        Batch { s, a, r, s_next, d }
    }
}
