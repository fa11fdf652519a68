//! Platoon membership bookkeeping.
//!
//! A platoon is identified by its head vehicle. Membership changes only at
//! junctions: a merging vehicle joins behind the current tail, and members
//! whose next edge differs from the head's detach.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Alone,
    Leader,
    Follower,
}

#[derive(Clone, Debug, Default)]
pub struct PlatoonRegistry {
    /// head -> ordered members, head first
    platoons: BTreeMap<u64, Vec<u64>>,
    head_of: BTreeMap<u64, u64>,
}

impl PlatoonRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn head(&self, vehicle: u64) -> Option<u64> {
        self.head_of.get(&vehicle).copied()
    }

    pub fn role(&self, vehicle: u64) -> Role {
        match self.head_of.get(&vehicle) {
            None => Role::Alone,
            Some(&h) if h == vehicle => Role::Leader,
            Some(_) => Role::Follower,
        }
    }

    pub fn members(&self, head: u64) -> &[u64] {
        self.platoons.get(&head).map_or(&[], Vec::as_slice)
    }

    /// Appends `follower` to the platoon containing `leader`; returns the head.
    pub fn join(&mut self, leader: u64, follower: u64) -> u64 {
        assert_ne!(leader, follower, "vehicle cannot follow itself");
        self.detach(follower);
        let head = match self.head_of.get(&leader) {
            Some(&h) => h,
            None => {
                self.platoons.insert(leader, vec![leader]);
                self.head_of.insert(leader, leader);
                leader
            }
        };
        let list = self.platoons.get_mut(&head).expect("head registered");
        list.push(follower);
        self.head_of.insert(follower, head);
        head
    }

    /// Removes `vehicle` from its platoon. If it was the head, the next member
    /// takes over; singleton platoons dissolve.
    pub fn detach(&mut self, vehicle: u64) {
        let Some(head) = self.head_of.remove(&vehicle) else {
            return;
        };
        let mut list = self.platoons.remove(&head).expect("platoon registered");
        list.retain(|&v| v != vehicle);
        match list.len() {
            0 => {}
            1 => {
                self.head_of.remove(&list[0]);
            }
            _ => {
                let new_head = list[0];
                for v in &list {
                    self.head_of.insert(*v, new_head);
                }
                self.platoons.insert(new_head, list);
            }
        }
    }

    /// Occupancy of a platoon in vehicle equivalents.
    pub fn density_weight(&self, head: u64, omega: f64) -> f64 {
        match self.members(head).len() {
            0 => 1.0,
            n => 1.0 + (n - 1) as f64 * omega,
        }
    }

    pub fn len(&self) -> usize {
        self.platoons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.platoons.is_empty()
    }

    /// Checks that every registered vehicle appears in exactly one platoon.
    pub fn is_consistent(&self) -> bool {
        let mut count = 0;
        for (head, list) in &self.platoons {
            if list.first() != Some(head) || list.len() < 2 {
                return false;
            }
            for v in list {
                if self.head_of.get(v) != Some(head) {
                    return false;
                }
            }
            count += list.len();
        }
        count == self.head_of.len()
    }
}
