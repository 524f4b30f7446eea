use std::fmt;
use std::net::IpAddr;
use std::str::FromStr;

use super::{DatasetError, LabeledDataset, Row, UNTARGETED};
use crate::features::FeatureVector;
use crate::flow::Flow;

/// Address predicate: one host or a CIDR prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Matcher {
    network: IpAddr,
    prefix: u8,
}

fn max_prefix(addr: &IpAddr) -> u8 {
    match addr {
        IpAddr::V4(_) => 32,
        IpAddr::V6(_) => 128,
    }
}

fn mask(addr: IpAddr, prefix: u8) -> IpAddr {
    match addr {
        IpAddr::V4(a) => {
            let bits = u32::from(a);
            let m = if prefix == 0 { 0 } else { u32::MAX << (32 - u32::from(prefix)) };
            IpAddr::V4((bits & m).into())
        }
        IpAddr::V6(a) => {
            let bits = u128::from(a);
            let m = if prefix == 0 { 0 } else { u128::MAX << (128 - u32::from(prefix)) };
            IpAddr::V6((bits & m).into())
        }
    }
}

impl Matcher {
    pub fn host(addr: IpAddr) -> Self {
        Matcher {
            network: addr,
            prefix: max_prefix(&addr),
        }
    }

    pub fn cidr(addr: IpAddr, prefix: u8) -> Result<Self, String> {
        if prefix > max_prefix(&addr) {
            return Err(format!("prefix /{prefix} too long for {addr}"));
        }
        Ok(Matcher {
            network: mask(addr, prefix),
            prefix,
        })
    }

    pub fn contains(&self, addr: IpAddr) -> bool {
        addr.is_ipv4() == self.network.is_ipv4() && mask(addr, self.prefix) == self.network
    }

    pub fn overlaps(&self, other: &Matcher) -> bool {
        if self.network.is_ipv4() != other.network.is_ipv4() {
            return false;
        }
        let p = self.prefix.min(other.prefix);
        mask(self.network, p) == mask(other.network, p)
    }
}

impl FromStr for Matcher {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        match s.split_once('/') {
            Some((addr, prefix)) => {
                let addr: IpAddr = addr.parse().map_err(|e| format!("{addr:?}: {e}"))?;
                let prefix: u8 = prefix.parse().map_err(|e| format!("prefix {prefix:?}: {e}"))?;
                Matcher::cidr(addr, prefix)
            }
            None => s
                .parse()
                .map(Matcher::host)
                .map_err(|e| format!("{s:?}: {e}")),
        }
    }
}

impl fmt::Display for Matcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prefix == max_prefix(&self.network) {
            write!(f, "{}", self.network)
        } else {
            write!(f, "{}/{}", self.network, self.prefix)
        }
    }
}

/// The monitored sites and the addresses that identify them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonitoredList {
    entries: Vec<(String, Vec<Matcher>)>,
}

impl MonitoredList {
    /// Build a list; matchers of different sites must not overlap.
    pub fn new(entries: Vec<(String, Vec<Matcher>)>) -> Result<Self, DatasetError> {
        let mut merged: Vec<(String, Vec<Matcher>)> = Vec::new();
        for (site, matchers) in entries {
            if site.is_empty() || site.eq_ignore_ascii_case(UNTARGETED) || site.contains(',') {
                return Err(DatasetError::InvalidMonitoredList {
                    line: 0,
                    reason: format!("invalid site label {site:?}"),
                });
            }
            match merged.iter_mut().find(|(s, _)| *s == site) {
                Some((_, existing)) => existing.extend(matchers),
                None => merged.push((site, matchers)),
            }
        }
        for (i, (site_a, ms_a)) in merged.iter().enumerate() {
            for (site_b, ms_b) in &merged[i + 1..] {
                for a in ms_a {
                    if let Some(b) = ms_b.iter().find(|b| a.overlaps(b)) {
                        return Err(DatasetError::OverlappingMatchers {
                            first: a.to_string(),
                            first_site: site_a.clone(),
                            second: b.to_string(),
                            second_site: site_b.clone(),
                        });
                    }
                }
            }
        }
        Ok(MonitoredList { entries: merged })
    }

    /// Parse the `label,matcher` text format; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, DatasetError> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((site, matcher)) = line.split_once(',') else {
                return Err(DatasetError::InvalidMonitoredList {
                    line: n + 1,
                    reason: "expected `label,matcher`".into(),
                });
            };
            let matcher = matcher
                .parse::<Matcher>()
                .map_err(|reason| DatasetError::InvalidMonitoredList { line: n + 1, reason })?;
            entries.push((site.trim().to_string(), vec![matcher]));
        }
        Self::new(entries).map_err(|e| match e {
            DatasetError::InvalidMonitoredList { reason, .. } => {
                DatasetError::InvalidMonitoredList { line: 0, reason }
            }
            other => other,
        })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# label,matcher\n");
        for (site, matchers) in &self.entries {
            for m in matchers {
                out.push_str(&format!("{site},{m}\n"));
            }
        }
        out
    }

    pub fn sites(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(s, _)| s.as_str())
    }

    /// Site owning `addr`, if any.
    pub fn lookup(&self, addr: IpAddr) -> Result<Option<&str>, DatasetError> {
        let hits: Vec<&str> = self
            .entries
            .iter()
            .filter(|(_, ms)| ms.iter().any(|m| m.contains(addr)))
            .map(|(s, _)| s.as_str())
            .collect();
        match hits.as_slice() {
            [] => Ok(None),
            [one] => Ok(Some(one)),
            many => Err(DatasetError::AmbiguousMatch {
                addr: addr.to_string(),
                sites: many.iter().map(|s| s.to_string()).collect(),
            }),
        }
    }

    /// Site of a flow: the site matching either endpoint.
    pub fn site_for(&self, flow: &Flow) -> Result<Option<&str>, DatasetError> {
        let a = self.lookup(flow.key.a.addr)?;
        let b = self.lookup(flow.key.b.addr)?;
        match (a, b) {
            (Some(x), Some(y)) if x != y => Err(DatasetError::AmbiguousMatch {
                addr: format!("{} / {}", flow.key.a.addr, flow.key.b.addr),
                sites: vec![x.to_string(), y.to_string()],
            }),
            (Some(x), _) | (None, Some(x)) => Ok(Some(x)),
            (None, None) => Ok(None),
        }
    }
}

/// Tag each flow with its monitored site.
pub fn label(
    flows: &[Flow],
    features: &[FeatureVector],
    list: &MonitoredList,
) -> Result<LabeledDataset, DatasetError> {
    if flows.len() != features.len() {
        return Err(DatasetError::InvalidRow {
            row: flows.len().min(features.len()),
            reason: format!(
                "{} flows but {} feature vectors",
                flows.len(),
                features.len()
            ),
        });
    }
    let rows = flows
        .iter()
        .zip(features)
        .map(|(flow, fv)| {
            Ok(match list.site_for(flow)? {
                Some(site) => Row::targeted(fv.to_row(), site),
                None => Row::untargeted(fv.to_row()),
            })
        })
        .collect::<Result<Vec<_>, DatasetError>>()?;
    LabeledDataset::with_flow_schema(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capture::Transport;
    use crate::dataset::BinaryLabel;
    use crate::features::featurize;
    use crate::flow::{Endpoint, FlowKey, Termination};

    fn flow_between(a: &str, b: &str) -> Flow {
        let a = Endpoint {
            addr: a.parse().unwrap(),
            port: 40000,
        };
        let b = Endpoint {
            addr: b.parse().unwrap(),
            port: 443,
        };
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        Flow {
            key: FlowKey {
                a: lo,
                b: hi,
                transport: Transport::Tcp,
            },
            initiator: a,
            first_ts: 0.0,
            last_ts: 1.0,
            fwd_packets: 2,
            bwd_packets: 1,
            fwd_bytes: 200,
            bwd_bytes: 100,
            fwd_payload_bytes: 0,
            bwd_payload_bytes: 0,
            termination: Termination::EndOfCapture,
        }
    }

    #[test]
    fn exact_match_labels_targeted() {
        let list = MonitoredList::parse("siteA,93.184.216.34\n").unwrap();
        let flows = vec![
            flow_between("192.168.1.5", "93.184.216.34"),
            flow_between("192.168.1.5", "10.0.0.1"),
        ];
        let fv: Vec<_> = flows.iter().map(featurize).collect();
        let ds = label(&flows, &fv, &list).unwrap();
        assert_eq!(ds.rows[0].binary, BinaryLabel::Targeted);
        assert_eq!(ds.rows[0].site.as_deref(), Some("siteA"));
        assert_eq!(ds.rows[1].binary, BinaryLabel::Untargeted);
        assert_eq!(ds.rows[1].site, None);
    }

    #[test]
    fn cidr_and_comments() {
        let list = MonitoredList::parse(
            "# media sites\nsiteA,203.0.113.0/24 # cdn\n\nsiteB,2001:db8::/32\nsiteB,198.51.100.7\n",
        )
        .unwrap();
        assert_eq!(list.lookup("203.0.113.77".parse().unwrap()).unwrap(), Some("siteA"));
        assert_eq!(list.lookup("2001:db8::9".parse().unwrap()).unwrap(), Some("siteB"));
        assert_eq!(list.lookup("198.51.100.7".parse().unwrap()).unwrap(), Some("siteB"));
        assert_eq!(list.lookup("198.51.100.8".parse().unwrap()).unwrap(), None);
        assert_eq!(list.sites().collect::<Vec<_>>(), vec!["siteA", "siteB"]);
        let again = MonitoredList::parse(&list.to_text()).unwrap();
        assert_eq!(again, list);
    }

    #[test]
    fn overlapping_sites_rejected() {
        let err = MonitoredList::parse("a,10.0.0.0/8\nb,10.1.2.3\n").unwrap_err();
        assert!(matches!(err, DatasetError::OverlappingMatchers { .. }));
        assert!(MonitoredList::parse("untargeted,10.0.0.1\n").is_err());
        assert!(MonitoredList::parse("a 10.0.0.1\n").is_err());
    }

    #[test]
    fn endpoints_in_two_sites_are_ambiguous() {
        let list = MonitoredList::parse("a,10.0.0.1\nb,10.0.0.2\n").unwrap();
        let flows = vec![flow_between("10.0.0.1", "10.0.0.2")];
        let fv: Vec<_> = flows.iter().map(featurize).collect();
        assert!(matches!(
            label(&flows, &fv, &list),
            Err(DatasetError::AmbiguousMatch { .. })
        ));
    }
}
