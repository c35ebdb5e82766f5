//! Contact generation: random-waypoint mobility over a square field,
//! static topologies for protocol tests, and a line-oriented trace file
//! format for replayable experiments.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seeds::{self, STREAM_MOBILITY};

/// Random-waypoint parameters. Speeds are in field units per epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RwpConfig {
    pub field_size: f64,
    pub radio_range: f64,
    pub speed_min: f64,
    pub speed_max: f64,
    pub pause_epochs_max: u32,
    pub num_nodes: usize,
    pub seed: u64,
}

impl Default for RwpConfig {
    fn default() -> Self {
        Self {
            field_size: 500.0,
            radio_range: 100.0,
            speed_min: 5.0,
            speed_max: 25.0,
            pause_epochs_max: 5,
            num_nodes: 10,
            seed: 0,
        }
    }
}

impl RwpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.field_size <= 0.0 || !self.field_size.is_finite() {
            return Err(Error::InvalidArgument("field_size must be positive".into()));
        }
        if self.radio_range <= 0.0 || !self.radio_range.is_finite() {
            return Err(Error::InvalidArgument("radio_range must be positive".into()));
        }
        if self.speed_min < 0.0 || self.speed_max < self.speed_min {
            return Err(Error::InvalidArgument(
                "need 0 <= speed_min <= speed_max".into(),
            ));
        }
        if self.num_nodes == 0 {
            return Err(Error::InvalidArgument("num_nodes must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch neighbor relation over nodes. Pairs are stored once as
/// `(a, b)` with `a < b`, sorted; the relation is symmetric and
/// irreflexive by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactTrace {
    num_nodes: usize,
    contacts: Vec<Vec<(u32, u32)>>,
}

impl ContactTrace {
    /// A trace with the given number of epochs and no contacts (the
    /// self-train degenerate case).
    pub fn empty(num_nodes: usize, num_epochs: usize) -> Self {
        Self {
            num_nodes,
            contacts: vec![Vec::new(); num_epochs],
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_epochs(&self) -> usize {
        self.contacts.len()
    }

    /// Records a contact; the pair is normalized to `a < b`.
    pub fn insert(&mut self, epoch: usize, a: usize, b: usize) -> Result<()> {
        if epoch >= self.num_epochs() {
            return Err(Error::OutOfBounds(format!(
                "epoch {epoch} >= {}",
                self.num_epochs()
            )));
        }
        if a >= self.num_nodes || b >= self.num_nodes {
            return Err(Error::OutOfBounds(format!(
                "node pair ({a},{b}) >= {}",
                self.num_nodes
            )));
        }
        if a == b {
            return Err(Error::InvalidArgument(format!(
                "self-contact {a},{b} is not allowed"
            )));
        }
        let pair = (a.min(b) as u32, a.max(b) as u32);
        let epoch_pairs = &mut self.contacts[epoch];
        if let Err(pos) = epoch_pairs.binary_search(&pair) {
            epoch_pairs.insert(pos, pair);
        }
        Ok(())
    }

    /// The sorted contact pairs of one epoch.
    pub fn pairs(&self, epoch: usize) -> Result<&[(u32, u32)]> {
        self.contacts
            .get(epoch)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::OutOfBounds(format!("epoch {epoch} >= {}", self.num_epochs())))
    }

    /// Sorted, self-excluding neighbor set of one node at one epoch.
    pub fn neighbors(&self, epoch: usize, node: usize) -> Result<Vec<usize>> {
        if node >= self.num_nodes {
            return Err(Error::OutOfBounds(format!(
                "node {node} >= {}",
                self.num_nodes
            )));
        }
        let pairs = self.pairs(epoch)?;
        let node = node as u32;
        let mut out: Vec<usize> = pairs
            .iter()
            .filter_map(|&(a, b)| {
                if a == node {
                    Some(b as usize)
                } else if b == node {
                    Some(a as usize)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        Ok(out)
    }

    /// Writes the trace: a header line, then one `epoch,node_a,node_b`
    /// line per contact, sorted by epoch then pair.
    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(
            w,
            "wafl-trace v1 nodes={} epochs={}",
            self.num_nodes,
            self.num_epochs()
        )?;
        for (epoch, pairs) in self.contacts.iter().enumerate() {
            for &(a, b) in pairs {
                writeln!(w, "{epoch},{a},{b}")?;
            }
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write(&mut f)
    }

    /// Parses a trace file. Contacts must be strictly ordered by
    /// (epoch, pair) with `node_a < node_b`; anything else is a format
    /// error.
    pub fn read<R: BufRead>(r: &mut R) -> Result<Self> {
        let mut header = String::new();
        r.read_line(&mut header)?;
        let header = header.trim_end();
        let rest = header
            .strip_prefix("wafl-trace v1 ")
            .ok_or_else(|| Error::Format(format!("bad trace header: {header:?}")))?;
        let mut nodes = None;
        let mut epochs = None;
        for field in rest.split_whitespace() {
            if let Some(v) = field.strip_prefix("nodes=") {
                nodes = v.parse::<usize>().ok();
            } else if let Some(v) = field.strip_prefix("epochs=") {
                epochs = v.parse::<usize>().ok();
            }
        }
        let (num_nodes, num_epochs) = match (nodes, epochs) {
            (Some(n), Some(e)) => (n, e),
            _ => return Err(Error::Format(format!("bad trace header: {header:?}"))),
        };

        let mut trace = Self::empty(num_nodes, num_epochs);
        let mut last: Option<(usize, u32, u32)> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut it = line.split(',');
            let parse = |s: Option<&str>| -> Result<usize> {
                s.and_then(|v| v.trim().parse::<usize>().ok())
                    .ok_or_else(|| Error::Format(format!("bad trace line {}: {line:?}", lineno + 2)))
            };
            let epoch = parse(it.next())?;
            let a = parse(it.next())?;
            let b = parse(it.next())?;
            if it.next().is_some() {
                return Err(Error::Format(format!(
                    "bad trace line {}: {line:?}",
                    lineno + 2
                )));
            }
            if a >= b {
                return Err(Error::Format(format!(
                    "trace line {} must satisfy node_a < node_b: {line:?}",
                    lineno + 2
                )));
            }
            if epoch >= num_epochs || b >= num_nodes {
                return Err(Error::Format(format!(
                    "trace line {} out of range: {line:?}",
                    lineno + 2
                )));
            }
            let key = (epoch, a as u32, b as u32);
            if let Some(prev) = last {
                if key <= prev {
                    return Err(Error::Format(format!(
                        "trace line {} is out of order: {line:?}",
                        lineno + 2
                    )));
                }
            }
            last = Some(key);
            trace.contacts[epoch].push((a as u32, b as u32));
        }
        Ok(trace)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read(&mut f)
    }
}

/// Fixed contact graphs, useful for consensus tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    Complete,
    Ring,
    Star,
}

impl std::str::FromStr for Topology {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complete" => Ok(Topology::Complete),
            "ring" => Ok(Topology::Ring),
            "star" => Ok(Topology::Star),
            other => Err(Error::InvalidArgument(format!("unknown topology {other:?}"))),
        }
    }
}

/// Builds a trace repeating the same static graph every epoch.
pub fn static_trace(topology: Topology, num_nodes: usize, num_epochs: usize) -> Result<ContactTrace> {
    if num_nodes < 2 {
        return Err(Error::InvalidArgument("need at least 2 nodes".into()));
    }
    let mut trace = ContactTrace::empty(num_nodes, num_epochs);
    for epoch in 0..num_epochs {
        match topology {
            Topology::Complete => {
                for a in 0..num_nodes {
                    for b in a + 1..num_nodes {
                        trace.insert(epoch, a, b)?;
                    }
                }
            }
            Topology::Ring => {
                for a in 0..num_nodes {
                    trace.insert(epoch, a, (a + 1) % num_nodes)?;
                }
            }
            Topology::Star => {
                for b in 1..num_nodes {
                    trace.insert(epoch, 0, b)?;
                }
            }
        }
    }
    Ok(trace)
}

struct RwpNode {
    pos: (f64, f64),
    target: (f64, f64),
    speed: f64,
    pause_left: u32,
    rng: ChaCha8Rng,
}

impl RwpNode {
    fn new(cfg: &RwpConfig, node: usize) -> Self {
        let mut rng =
            ChaCha8Rng::seed_from_u64(seeds::derive(cfg.seed, &[STREAM_MOBILITY, node as u64]));
        let pos = (
            rng.random_range(0.0..=cfg.field_size),
            rng.random_range(0.0..=cfg.field_size),
        );
        let mut n = Self {
            pos,
            target: pos,
            speed: 0.0,
            pause_left: 0,
            rng,
        };
        n.pick_waypoint(cfg);
        n
    }

    fn pick_waypoint(&mut self, cfg: &RwpConfig) {
        self.target = (
            self.rng.random_range(0.0..=cfg.field_size),
            self.rng.random_range(0.0..=cfg.field_size),
        );
        self.speed = self.rng.random_range(cfg.speed_min..=cfg.speed_max);
    }

    /// Advances one epoch: pause, or move toward the waypoint, clamping at
    /// arrival. On arrival the pause is drawn and the next leg chosen.
    fn step(&mut self, cfg: &RwpConfig) {
        if self.pause_left > 0 {
            self.pause_left -= 1;
            return;
        }
        let dx = self.target.0 - self.pos.0;
        let dy = self.target.1 - self.pos.1;
        let dist = (dx * dx + dy * dy).sqrt();
        if self.speed >= dist && dist > 0.0 {
            self.pos = self.target;
            self.pause_left = self.rng.random_range(0..=cfg.pause_epochs_max);
            self.pick_waypoint(cfg);
        } else if dist > 0.0 && self.speed > 0.0 {
            let scale = self.speed / dist;
            self.pos.0 += dx * scale;
            self.pos.1 += dy * scale;
        }
    }
}

fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    dx * dx + dy * dy
}

/// Runs the random-waypoint model and returns the contact trace together
/// with the per-epoch node positions the contacts were derived from.
/// An edge (a,b) exists at an epoch iff the euclidean distance between the
/// nodes is at most `radio_range` at that epoch boundary.
pub fn generate_trace_with_positions(
    cfg: &RwpConfig,
    num_epochs: usize,
) -> Result<(ContactTrace, Vec<Vec<(f64, f64)>>)> {
    cfg.validate()?;
    if num_epochs == 0 {
        return Err(Error::InvalidArgument("num_epochs must be positive".into()));
    }
    let mut nodes: Vec<RwpNode> = (0..cfg.num_nodes).map(|i| RwpNode::new(cfg, i)).collect();
    let mut trace = ContactTrace::empty(cfg.num_nodes, num_epochs);
    let mut positions = Vec::with_capacity(num_epochs);
    let range2 = cfg.radio_range * cfg.radio_range;
    for epoch in 0..num_epochs {
        let snapshot: Vec<(f64, f64)> = nodes.iter().map(|n| n.pos).collect();
        for a in 0..cfg.num_nodes {
            for b in a + 1..cfg.num_nodes {
                if dist2(snapshot[a], snapshot[b]) <= range2 {
                    trace.insert(epoch, a, b)?;
                }
            }
        }
        positions.push(snapshot);
        for node in &mut nodes {
            node.step(cfg);
        }
    }
    Ok((trace, positions))
}

/// See [`generate_trace_with_positions`]; discards the positions.
pub fn generate_trace(cfg: &RwpConfig, num_epochs: usize) -> Result<ContactTrace> {
    generate_trace_with_positions(cfg, num_epochs).map(|(t, _)| t)
}
