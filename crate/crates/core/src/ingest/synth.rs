use chrono::{Duration, TimeZone, Utc};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::LogNormal;
use serde::{Deserialize, Serialize};

use super::{EventType, RawEvent};

/// Parameters of the synthetic marketplace.
///
/// Users belong to `n_clusters` preference clusters. Collection `j` is
/// preferred by cluster `j % n_clusters`; the chance that a user from a
/// cluster trades in a collection is proportional to
/// `activity(user) * popularity(collection) * affinity^[preferred]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_users: usize,
    pub n_assets: usize,
    pub n_collections: usize,
    pub n_events: usize,
    pub n_clusters: usize,
    /// Multiplicative boost for a cluster's preferred collections.
    pub affinity: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_users: 200,
            n_assets: 500,
            n_collections: 20,
            n_events: 20_000,
            n_clusters: 4,
            affinity: 30.0,
            seed: 42,
        }
    }
}

const SLUGS: [&str; 20] = [
    "galverse",
    "etherthings",
    "scottkelly",
    "cyberronin",
    "lifeforms",
    "pixelmancers",
    "moonbirds-lite",
    "azukiverse",
    "chromatic-dreams",
    "deadfellaz",
    "tokyo-lanterns",
    "metasaurs",
    "glitch-garden",
    "sandbox-lands",
    "voxel-villas",
    "neon-samurai",
    "quantum-cats",
    "oceanic-odyssey",
    "paper-cranes",
    "broken-keys",
];

const NAME_STEMS: [&str; 8] = [
    "Life",
    "To be revealed",
    "CyberRonin Haruka",
    "Galaxy",
    "Thing",
    "Portrait",
    "Parcel",
    "Relic",
];

const TOKENS: [(&str, f64, f64); 4] = [
    // (symbol, USD per token, base units per token)
    ("ETH", 3000.0, 1e18),
    ("WETH", 3000.0, 1e18),
    ("USDC", 1.0, 1e6),
    ("DAI", 1.0, 1e18),
];

fn hex_address(rng: &mut impl Rng) -> String {
    let bytes: [u8; 20] = rng.random();
    let mut s = String::from("0x");
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

fn slug(i: usize) -> String {
    match SLUGS.get(i) {
        Some(s) => s.to_string(),
        None => format!("{}-{}", SLUGS[i % SLUGS.len()], i / SLUGS.len()),
    }
}

/// Draws a deterministic synthetic event stream inside the default cleaning window.
pub fn generate_synthetic(spec: &SynthSpec) -> Vec<RawEvent> {
    let n_users = spec.n_users.max(1);
    let n_assets = spec.n_assets.max(1);
    let n_collections = spec.n_collections.max(1).min(n_assets);
    let n_clusters = spec.n_clusters.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let spread = LogNormal::new(0.0, 0.5).unwrap();

    let users: Vec<String> = (0..n_users).map(|_| hex_address(&mut rng)).collect();
    let user_activity: Vec<f64> = (0..n_users).map(|_| spread.sample(&mut rng)).collect();
    let user_loyalty: Vec<f64> = (0..n_users).map(|_| rng.random_range(0.0..1000.0)).collect();

    let collection_address: Vec<String> = (0..n_collections).map(|_| hex_address(&mut rng)).collect();
    let collection_pop: Vec<f64> = (0..n_collections).map(|_| spread.sample(&mut rng)).collect();
    let base_price = LogNormal::new(300f64.ln(), 0.9).unwrap();
    let collection_price: Vec<f64> = (0..n_collections).map(|_| base_price.sample(&mut rng)).collect();

    struct Asset {
        id: String,
        name: String,
        collection: usize,
        popularity: f64,
        price: f64,
        num_sales: u64,
        loyalty: f64,
        seller: String,
    }
    let price_noise = LogNormal::new(0.0, 0.3).unwrap();
    let assets: Vec<Asset> = (0..n_assets)
        .map(|i| {
            let collection = i % n_collections;
            let mut num_sales = 1;
            while num_sales < 20 && rng.random_bool(0.35) {
                num_sales += 1;
            }
            Asset {
                id: (381_000_000 + i * 7919).to_string(),
                name: format!("{} #{}", NAME_STEMS[i % NAME_STEMS.len()], i + 1),
                collection,
                popularity: spread.sample(&mut rng),
                price: collection_price[collection] * price_noise.sample(&mut rng),
                num_sales,
                loyalty: rng.random_range(0.0..500.0),
                seller: hex_address(&mut rng),
            }
        })
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_collections];
    for (i, a) in assets.iter().enumerate() {
        members[a.collection].push(i);
    }
    let asset_pick: Vec<WeightedIndex<f64>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| assets[i].popularity)).unwrap())
        .collect();
    let cluster_pick: Vec<WeightedIndex<f64>> = (0..n_clusters)
        .map(|c| {
            WeightedIndex::new((0..n_collections).map(|j| {
                let boost = if j % n_clusters == c { spec.affinity } else { 1.0 };
                collection_pop[j] * boost
            }))
            .unwrap()
        })
        .collect();
    let user_pick = WeightedIndex::new(&user_activity).unwrap();
    let token_pick = WeightedIndex::new([55.0, 35.0, 7.0, 3.0]).unwrap();
    let type_pick = WeightedIndex::new([88.0, 6.0, 2.0, 2.0, 1.0, 1.0]).unwrap();
    let types = [
        EventType::Successful,
        EventType::BidWithdrawn,
        EventType::Created,
        EventType::Transfer,
        EventType::Cancelled,
        EventType::BidEntered,
    ];
    let jitter = LogNormal::new(0.0, 0.1).unwrap();

    let start = Utc.with_ymd_and_hms(2022, 4, 12, 15, 0, 0).unwrap();
    let window_us = Duration::hours(126).num_microseconds().unwrap();

    let mut events: Vec<RawEvent> = (0..spec.n_events)
        .map(|n| {
            let u = user_pick.sample(&mut rng);
            let c = cluster_pick[u % n_clusters].sample(&mut rng);
            let a = &assets[members[c][asset_pick[c].sample(&mut rng)]];
            let event_type = types[type_pick.sample(&mut rng)];
            let (token, token_usd, units) = TOKENS[token_pick.sample(&mut rng)];
            let mut usd = a.price * jitter.sample(&mut rng);
            if event_type == EventType::BidWithdrawn {
                usd *= 1.5;
            }
            let offset = rng.random_range(0..=window_us);

            let mut ev = RawEvent::empty(event_type);
            ev.event_id = Some((1_000_000 + n).to_string());
            ev.created_date = Some(start + Duration::microseconds(offset));
            ev.asset_id = Some(a.id.clone());
            ev.asset_name = Some(a.name.clone());
            ev.asset_address = Some(collection_address[c].clone());
            ev.collection_slug = Some(slug(c));
            ev.num_sales = (!rng.random_bool(0.03)).then_some(a.num_sales);
            ev.buyer_address = Some(users[u].clone());
            ev.seller_address = Some(a.seller.clone());
            ev.payment_token = Some(token.to_string());
            ev.total_price = Some((usd / token_usd * units).round());
            ev.absolute_price_usd = Some((usd * 100.0).round() / 100.0);
            ev.user_loyalty = Some((user_loyalty[u] * 100.0).round() / 100.0);
            ev.asset_loyalty = Some((a.loyalty * 100.0).round() / 100.0);
            ev.collection_loyalty =
                Some(((a.loyalty * 0.9 + rng.random_range(0.0..25.0)) * 100.0).round() / 100.0);
            let image = (!rng.random_bool(0.08))
                .then(|| format!("https://img.example/{}/{}.png", slug(c), a.id));
            ev.extra.insert("asset_image_url".into(), image);
            let top_bid = rng
                .random_bool(0.1)
                .then(|| format!("{:.2}", usd * 0.8));
            ev.extra.insert("top_bid".into(), top_bid);
            ev
        })
        .collect();
    events.sort_by_key(|e| e.created_date);
    events
}
