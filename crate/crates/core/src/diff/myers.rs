//! Linear-space shortest-edit-script search.
//!
//! Divide and conquer over the "middle snake": each level runs the greedy
//! forward and reverse searches simultaneously until they overlap, then
//! recurses on both halves. Runs in O((N+M)·D) time and O(N+M) space.
//!
//! Every diagonal probe and every matched element walked along a snake costs
//! one work unit, as does every element emitted by a pure insert/delete leaf.
//! Common prefix/suffix trimming is a plain slice comparison and is free.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut, Range};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Hunk {
    Equal(usize),
    Delete(usize),
    /// Range into the new sequence.
    Insert(usize, usize),
}

/// Furthest-reaching x per diagonal; diagonals may be negative.
struct V {
    offset: isize,
    v: Vec<usize>,
}

impl V {
    fn new(max_d: usize) -> Self {
        Self {
            offset: max_d as isize,
            v: vec![0; 2 * max_d + 2],
        }
    }
}

impl Index<isize> for V {
    type Output = usize;

    fn index(&self, k: isize) -> &usize {
        &self.v[(k + self.offset) as usize]
    }
}

impl IndexMut<isize> for V {
    fn index_mut(&mut self, k: isize) -> &mut usize {
        &mut self.v[(k + self.offset) as usize]
    }
}

fn max_d(n: usize, m: usize) -> usize {
    (n + m).div_ceil(2) + 1
}

fn common_prefix<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter().zip(b).take_while(|(x, y)| x == y).count()
}

fn common_suffix<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    a.iter()
        .rev()
        .zip(b.iter().rev())
        .take_while(|(x, y)| x == y)
        .count()
}

struct Search<'a, T> {
    old: &'a [T],
    new: &'a [T],
    vf: V,
    vb: V,
    work: u64,
    out: Vec<Hunk>,
}

impl<T: PartialEq> Search<'_, T> {
    fn push(&mut self, hunk: Hunk) {
        match (self.out.last_mut(), hunk) {
            (Some(Hunk::Equal(n)), Hunk::Equal(m)) => *n += m,
            (Some(Hunk::Delete(n)), Hunk::Delete(m)) => *n += m,
            (Some(Hunk::Insert(_, end)), Hunk::Insert(s, e)) if *end == s => *end = e,
            (_, h) => self.out.push(h),
        }
    }

    fn middle_snake(&mut self, old: Range<usize>, new: Range<usize>) -> Option<(usize, usize)> {
        let n = old.len();
        let m = new.len();
        let delta = n as isize - m as isize;
        let odd = delta & 1 == 1;
        self.vf[1] = 0;
        self.vb[1] = 0;

        for d in 0..max_d(n, m) as isize {
            let mut k = d;
            while k >= -d {
                self.work += 1;
                let mut x = if k == -d || (k != d && self.vf[k - 1] < self.vf[k + 1]) {
                    self.vf[k + 1]
                } else {
                    self.vf[k - 1] + 1
                };
                let y = (x as isize - k) as usize;
                let (x0, y0) = (x, y);
                if x < n && y < m {
                    let adv = common_prefix(
                        &self.old[old.start + x..old.end],
                        &self.new[new.start + y..new.end],
                    );
                    self.work += adv as u64;
                    x += adv;
                }
                self.vf[k] = x;
                if odd && (k - delta).abs() < d && self.vf[k] + self.vb[-(k - delta)] >= n {
                    return Some((x0 + old.start, y0 + new.start));
                }
                k -= 2;
            }

            let mut k = d;
            while k >= -d {
                self.work += 1;
                let mut x = if k == -d || (k != d && self.vb[k - 1] < self.vb[k + 1]) {
                    self.vb[k + 1]
                } else {
                    self.vb[k - 1] + 1
                };
                let mut y = (x as isize - k) as usize;
                if x < n && y < m {
                    let adv = common_suffix(
                        &self.old[old.start..old.start + n - x],
                        &self.new[new.start..new.start + m - y],
                    );
                    self.work += adv as u64;
                    x += adv;
                    y += adv;
                }
                self.vb[k] = x;
                if !odd && (k - delta).abs() <= d && self.vb[k] + self.vf[-(k - delta)] >= n {
                    return Some((n - x + old.start, m - y + new.start));
                }
                k -= 2;
            }
        }
        None
    }

    fn conquer(&mut self, mut old: Range<usize>, mut new: Range<usize>) {
        let prefix = common_prefix(&self.old[old.clone()], &self.new[new.clone()]);
        if prefix > 0 {
            self.push(Hunk::Equal(prefix));
        }
        old.start += prefix;
        new.start += prefix;
        let suffix = common_suffix(&self.old[old.clone()], &self.new[new.clone()]);
        old.end -= suffix;
        new.end -= suffix;

        if old.is_empty() && new.is_empty() {
        } else if new.is_empty() {
            self.work += old.len() as u64;
            self.push(Hunk::Delete(old.len()));
        } else if old.is_empty() {
            self.work += new.len() as u64;
            self.push(Hunk::Insert(new.start, new.end));
        } else if let Some((x, y)) = self.middle_snake(old.clone(), new.clone()) {
            self.conquer(old.start..x, new.start..y);
            self.conquer(x..old.end, y..new.end);
        } else {
            // unreachable for a correct search; degrade to replace-all
            self.work += (old.len() + new.len()) as u64;
            self.push(Hunk::Delete(old.len()));
            self.push(Hunk::Insert(new.start, new.end));
        }

        if suffix > 0 {
            self.push(Hunk::Equal(suffix));
        }
    }
}

/// Shortest edit script between `old` and `new` plus the work spent finding it.
pub(crate) fn diff_slices<T: PartialEq>(old: &[T], new: &[T]) -> (Vec<Hunk>, u64) {
    let d = max_d(old.len(), new.len());
    let mut search = Search {
        old,
        new,
        vf: V::new(d),
        vb: V::new(d),
        work: 0,
        out: Vec::new(),
    };
    search.conquer(0..old.len(), 0..new.len());
    (search.out, search.work)
}
