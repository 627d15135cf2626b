use rand::seq::index;
use rand::Rng;

/// Fixed-capacity ring buffer that overwrites its oldest entry when full.
#[derive(Debug, Clone)]
pub struct ReplayMemory<T> {
    items: Vec<T>,
    capacity: usize,
    next: usize,
}

impl<T> ReplayMemory<T> {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            items: Vec::with_capacity(capacity.min(1 << 16)),
            capacity,
            next: 0,
        }
    }

    pub fn push(&mut self, item: T) {
        if self.items.len() < self.capacity {
            self.items.push(item);
        } else {
            self.items[self.next] = item;
        }
        self.next = (self.next + 1) % self.capacity;
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Entries from oldest to newest.
    pub fn iter_oldest_first(&self) -> impl Iterator<Item = &T> {
        let split = if self.items.len() < self.capacity { 0 } else { self.next };
        self.items[split..].iter().chain(&self.items[..split])
    }

    /// Uniform sample of `batch` distinct entries (fewer if the memory holds
    /// fewer).
    pub fn sample<R: Rng + ?Sized>(&self, batch: usize, rng: &mut R) -> Vec<&T> {
        let k = batch.min(self.items.len());
        index::sample(rng, self.items.len(), k)
            .into_iter()
            .map(|i| &self.items[i])
            .collect()
    }
}
