use crate::error::{Error, Result};
use crate::link_cost::LinkParams;

/// A directed link; node ids are 0-based internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub tail: usize,
    pub head: usize,
    pub params: LinkParams,
}

/// Road network. Link order is the stable link id.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub node_count: usize,
    pub zone_count: usize,
    /// 0-based index of the first node that may carry through traffic.
    /// Nodes below it are zone centroids and can only start or end a path.
    pub first_thru_node: usize,
    pub links: Vec<Link>,
}

impl Network {
    pub fn new(
        node_count: usize,
        zone_count: usize,
        first_thru_node: usize,
        links: Vec<Link>,
    ) -> Result<Self> {
        let net = Network {
            node_count,
            zone_count,
            first_thru_node,
            links,
        };
        net.validate()?;
        Ok(net)
    }

    /// Every node may be an intermediate node.
    pub fn unrestricted(node_count: usize, links: Vec<Link>) -> Result<Self> {
        Network::new(node_count, node_count, 0, links)
    }

    pub fn validate(&self) -> Result<()> {
        for (id, link) in self.links.iter().enumerate() {
            if link.tail >= self.node_count || link.head >= self.node_count {
                return Err(Error::Invalid(format!(
                    "link {} references a node outside 1..={}",
                    id + 1,
                    self.node_count
                )));
            }
            if link.tail == link.head {
                return Err(Error::Invalid(format!("link {} is a self-loop", id + 1)));
            }
            link.params.validate()?;
        }
        Ok(())
    }

    pub fn link_count(&self) -> usize {
        self.links.len()
    }

    pub fn is_centroid(&self, node: usize) -> bool {
        node < self.first_thru_node
    }

    pub fn free_flow_times(&self) -> Vec<f64> {
        self.links.iter().map(|l| l.params.free_flow_time).collect()
    }

    pub fn mean_free_flow_time(&self) -> f64 {
        if self.links.is_empty() {
            return 0.0;
        }
        self.links
            .iter()
            .map(|l| l.params.free_flow_time)
            .sum::<f64>()
            / self.links.len() as f64
    }

    /// Replaces kappa and/or the BPR exponent on every link.
    pub fn with_overrides(mut self, kappa: Option<f64>, power: Option<f64>) -> Result<Self> {
        for link in &mut self.links {
            if let Some(k) = kappa {
                link.params.kappa = k;
            }
            if let Some(p) = power {
                link.params.power = p;
            }
        }
        self.validate()?;
        Ok(self)
    }
}
