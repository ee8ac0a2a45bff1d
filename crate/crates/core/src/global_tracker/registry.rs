//! Global identity registry.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::{Camera, GlobalId, MatchSet};
use crate::local_tracker::LocalId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RegistryConfig {
    /// Frames an unmatched local waits before it gets its own global ID.
    pub solo_grace: u32,
    /// Frames a bound local may go unseen before its binding is released.
    pub expiry: u32,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        Self {
            solo_grace: 15,
            expiry: 150,
        }
    }
}

/// A persistent global identity and the locals currently bound to it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalIdentity {
    pub global_id: GlobalId,
    pub bindings: BTreeMap<Camera, LocalId>,
    pub last_seen: BTreeMap<Camera, i64>,
}

/// Key of a local track across both streams.
pub type LocalKey = (Camera, LocalId);

/// Something that happened during an update, for audit logs and tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegistryEvent {
    Minted { global: GlobalId, ceiling: Option<LocalId>, angled: Option<LocalId> },
    Extended { global: GlobalId, camera: Camera, local: LocalId },
    Merged { kept: GlobalId, retired: GlobalId },
    Unbound { camera: Camera, local: LocalId, global: GlobalId },
    Expired { camera: Camera, local: LocalId, global: GlobalId },
}

#[derive(Debug, Clone)]
pub struct Registry {
    cfg: RegistryConfig,
    next_id: u32,
    identities: BTreeMap<GlobalId, GlobalIdentity>,
    bound: BTreeMap<LocalKey, GlobalId>,
    /// Unbound locals and the frame they were first seen.
    pending: BTreeMap<LocalKey, i64>,
    events: Vec<RegistryEvent>,
}

impl Registry {
    pub fn new(cfg: RegistryConfig) -> Self {
        Self {
            cfg,
            next_id: 1,
            identities: BTreeMap::new(),
            bound: BTreeMap::new(),
            pending: BTreeMap::new(),
            events: Vec::new(),
        }
    }

    pub fn lookup(&self, camera: Camera, local: LocalId) -> Option<GlobalId> {
        self.bound.get(&(camera, local)).copied()
    }

    /// Identities that still exist (not retired by a merge).
    pub fn identities(&self) -> impl Iterator<Item = &GlobalIdentity> {
        self.identities.values()
    }

    /// Number of global IDs issued so far, retired ones included.
    pub fn issued(&self) -> u32 {
        self.next_id - 1
    }

    pub fn is_pending(&self, camera: Camera, local: LocalId) -> bool {
        self.pending.contains_key(&(camera, local))
    }

    /// Drains the events recorded since the last call.
    pub fn take_events(&mut self) -> Vec<RegistryEvent> {
        core::mem::take(&mut self.events)
    }

    fn mint(&mut self) -> GlobalId {
        let g = GlobalId(self.next_id);
        self.next_id += 1;
        self.identities.insert(
            g,
            GlobalIdentity {
                global_id: g,
                bindings: BTreeMap::new(),
                last_seen: BTreeMap::new(),
            },
        );
        g
    }

    fn unbind(&mut self, camera: Camera, local: LocalId) {
        if let Some(g) = self.bound.remove(&(camera, local)) {
            if let Some(id) = self.identities.get_mut(&g) {
                if id.bindings.get(&camera) == Some(&local) {
                    id.bindings.remove(&camera);
                }
            }
            self.events.push(RegistryEvent::Unbound { camera, local, global: g });
        }
    }

    /// Binds a local to `g`, displacing whatever `g` held on that camera.
    fn bind(&mut self, camera: Camera, local: LocalId, g: GlobalId, frame: i64) {
        if self.bound.get(&(camera, local)) == Some(&g) {
            return;
        }
        self.unbind(camera, local);
        let displaced = self.identities.get(&g).and_then(|id| id.bindings.get(&camera).copied());
        if let Some(old) = displaced {
            self.unbind(camera, old);
        }
        self.pending.remove(&(camera, local));
        self.bound.insert((camera, local), g);
        let id = self.identities.get_mut(&g).expect("bound identity exists");
        id.bindings.insert(camera, local);
        id.last_seen.insert(camera, frame);
    }

    fn touch(&mut self, camera: Camera, local: LocalId, frame: i64) {
        if let Some(g) = self.bound.get(&(camera, local)) {
            if let Some(id) = self.identities.get_mut(g) {
                id.last_seen.insert(camera, frame);
            }
        }
    }

    /// Applies one aligned frame: matched pairs first (in ceiling-ID
    /// order), then unmatched active locals, then expiry. Returns the global
    /// ID of every active local that is bound after the update.
    pub fn update(&mut self, frame: i64, matches: &MatchSet, ceiling_active: &[LocalId], angled_active: &[LocalId]) -> BTreeMap<LocalKey, GlobalId> {
        for (c, a) in matches.iter() {
            let cg = self.lookup(Camera::Ceiling, c);
            let ag = self.lookup(Camera::Angled, a);
            match (cg, ag) {
                (None, None) => {
                    let g = self.mint();
                    self.bind(Camera::Ceiling, c, g, frame);
                    self.bind(Camera::Angled, a, g, frame);
                    self.events.push(RegistryEvent::Minted {
                        global: g,
                        ceiling: Some(c),
                        angled: Some(a),
                    });
                }
                (Some(g), None) => {
                    self.bind(Camera::Angled, a, g, frame);
                    self.events.push(RegistryEvent::Extended {
                        global: g,
                        camera: Camera::Angled,
                        local: a,
                    });
                }
                (None, Some(g)) => {
                    self.bind(Camera::Ceiling, c, g, frame);
                    self.events.push(RegistryEvent::Extended {
                        global: g,
                        camera: Camera::Ceiling,
                        local: c,
                    });
                }
                (Some(x), Some(y)) if x == y => {}
                (Some(x), Some(y)) => {
                    let (kept, retired) = if x < y { (x, y) } else { (y, x) };
                    let moved: Vec<(Camera, LocalId)> = self.identities[&retired]
                        .bindings
                        .iter()
                        .map(|(&cam, &l)| (cam, l))
                        .collect();
                    for (cam, l) in moved {
                        self.unbind(cam, l);
                    }
                    self.identities.remove(&retired);
                    self.events.push(RegistryEvent::Merged { kept, retired });
                    self.bind(Camera::Ceiling, c, kept, frame);
                    self.bind(Camera::Angled, a, kept, frame);
                }
            }
        }

        for (camera, active) in [(Camera::Ceiling, ceiling_active), (Camera::Angled, angled_active)] {
            for &l in active {
                if self.bound.contains_key(&(camera, l)) {
                    self.touch(camera, l, frame);
                } else {
                    self.pending.entry((camera, l)).or_insert(frame);
                }
            }
        }

        let grace = i64::from(self.cfg.solo_grace);
        let due: Vec<LocalKey> = self
            .pending
            .iter()
            .filter(|(_, &first)| frame - first >= grace)
            .map(|(&k, _)| k)
            .collect();
        for (camera, l) in due {
            self.mint_solo(camera, l, frame);
        }

        let expiry = i64::from(self.cfg.expiry);
        let stale: Vec<(Camera, LocalId, GlobalId)> = self
            .bound
            .iter()
            .filter(|((cam, _), g)| {
                self.identities
                    .get(g)
                    .and_then(|id| id.last_seen.get(cam))
                    .is_some_and(|&seen| frame - seen > expiry)
            })
            .map(|(&(cam, l), &g)| (cam, l, g))
            .collect();
        for (camera, local, global) in stale {
            self.bound.remove(&(camera, local));
            if let Some(id) = self.identities.get_mut(&global) {
                id.bindings.remove(&camera);
                id.last_seen.remove(&camera);
            }
            self.events.push(RegistryEvent::Expired { camera, local, global });
        }

        let mut out = BTreeMap::new();
        for (camera, active) in [(Camera::Ceiling, ceiling_active), (Camera::Angled, angled_active)] {
            for &l in active {
                if let Some(g) = self.lookup(camera, l) {
                    out.insert((camera, l), g);
                }
            }
        }
        out
    }

    fn mint_solo(&mut self, camera: Camera, local: LocalId, frame: i64) -> GlobalId {
        let g = self.mint();
        self.bind(camera, local, g, frame);
        let (ceiling, angled) = match camera {
            Camera::Ceiling => (Some(local), None),
            Camera::Angled => (None, Some(local)),
        };
        self.events.push(RegistryEvent::Minted { global: g, ceiling, angled });
        g
    }

    /// Gives every still-pending local its own global ID (end of stream).
    pub fn finalize(&mut self, frame: i64) {
        let keys: Vec<LocalKey> = self.pending.keys().copied().collect();
        for (camera, l) in keys {
            self.mint_solo(camera, l, frame);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn ms(pairs: &[(u32, u32)]) -> MatchSet {
        pairs.iter().map(|&(c, a)| (LocalId(c), LocalId(a))).collect()
    }

    fn l(ids: &[u32]) -> Vec<LocalId> {
        ids.iter().map(|&i| LocalId(i)).collect()
    }

    fn cfg(grace: u32) -> RegistryConfig {
        RegistryConfig {
            solo_grace: grace,
            expiry: 150,
        }
    }

    #[test]
    fn first_match_mints_and_repeats_are_stable() {
        let mut r = Registry::new(RegistryConfig::default());
        let a = r.update(0, &ms(&[(1, 1)]), &l(&[1]), &l(&[1]));
        assert_eq!(a[&(Camera::Ceiling, LocalId(1))], GlobalId(1));
        assert_eq!(a[&(Camera::Angled, LocalId(1))], GlobalId(1));
        let b = r.update(1, &ms(&[(1, 1)]), &l(&[1]), &l(&[1]));
        assert_eq!(a, b);
        assert_eq!(r.issued(), 1);
    }

    /// Script:
    /// f0: ceiling 1 alone, angled 5 alone (both pending, grace 2)
    /// f1: same
    /// f2: grace reached → c1 gets G1, a5 gets G2
    /// f3: c1 matched with a5 → merge into G1, G2 retired
    /// f4: c2 appears matched with a5 → c2 takes G1's ceiling slot, c1 unbound
    #[test]
    fn hand_simulated_five_frame_script() {
        let mut r = Registry::new(cfg(2));
        let mut trace = Vec::new();
        let script: [(&[(u32, u32)], &[u32], &[u32]); 5] = [
            (&[], &[1], &[5]),
            (&[], &[1], &[5]),
            (&[], &[1], &[5]),
            (&[(1, 5)], &[1], &[5]),
            (&[(2, 5)], &[1, 2], &[5]),
        ];
        for (f, (m, c, a)) in script.iter().enumerate() {
            let out = r.update(f as i64, &ms(m), &l(c), &l(a));
            trace.push(out.into_iter().map(|((cam, loc), g)| (cam, loc.0, g.0)).collect::<Vec<_>>());
        }
        let expected: Vec<Vec<(Camera, u32, u32)>> = vec![
            vec![],
            vec![],
            vec![(Camera::Ceiling, 1, 1), (Camera::Angled, 5, 2)],
            vec![(Camera::Ceiling, 1, 1), (Camera::Angled, 5, 1)],
            vec![(Camera::Ceiling, 2, 1), (Camera::Angled, 5, 1)],
        ];
        assert_eq!(trace, expected);
        assert!(r.is_pending(Camera::Ceiling, LocalId(1)));
        assert_eq!(r.identities().count(), 1);
        assert_eq!(r.issued(), 2);
    }

    #[test]
    fn merge_prefers_older_id() {
        let mut r = Registry::new(cfg(0));
        r.update(0, &ms(&[]), &l(&[3]), &[]);
        r.update(1, &ms(&[]), &[], &l(&[4]));
        assert_eq!(r.lookup(Camera::Ceiling, LocalId(3)), Some(GlobalId(1)));
        assert_eq!(r.lookup(Camera::Angled, LocalId(4)), Some(GlobalId(2)));
        r.update(2, &ms(&[(3, 4)]), &l(&[3]), &l(&[4]));
        assert_eq!(r.lookup(Camera::Angled, LocalId(4)), Some(GlobalId(1)));
        let ev = r.take_events();
        assert!(ev.contains(&RegistryEvent::Merged {
            kept: GlobalId(1),
            retired: GlobalId(2)
        }));
    }

    #[test]
    fn inactive_pending_local_still_minted() {
        let mut r = Registry::new(cfg(3));
        r.update(0, &ms(&[]), &[], &l(&[9]));
        r.update(1, &ms(&[]), &[], &[]);
        r.update(2, &ms(&[]), &[], &[]);
        assert!(r.is_pending(Camera::Angled, LocalId(9)));
        r.update(3, &ms(&[]), &[], &[]);
        assert_eq!(r.lookup(Camera::Angled, LocalId(9)), Some(GlobalId(1)));
    }

    #[test]
    fn bindings_expire() {
        let mut r = Registry::new(RegistryConfig {
            solo_grace: 0,
            expiry: 5,
        });
        r.update(0, &ms(&[(1, 1)]), &l(&[1]), &l(&[1]));
        for f in 1..=5 {
            r.update(f, &ms(&[]), &l(&[1]), &[]);
        }
        assert_eq!(r.lookup(Camera::Angled, LocalId(1)), Some(GlobalId(1)));
        r.update(6, &ms(&[]), &l(&[1]), &[]);
        assert_eq!(r.lookup(Camera::Angled, LocalId(1)), None);
        assert_eq!(r.lookup(Camera::Ceiling, LocalId(1)), Some(GlobalId(1)));
    }

    #[test]
    fn finalize_flushes_pending() {
        let mut r = Registry::new(RegistryConfig::default());
        r.update(0, &ms(&[]), &l(&[1, 2]), &[]);
        r.finalize(0);
        assert_eq!(r.lookup(Camera::Ceiling, LocalId(1)), Some(GlobalId(1)));
        assert_eq!(r.lookup(Camera::Ceiling, LocalId(2)), Some(GlobalId(2)));
    }
}
