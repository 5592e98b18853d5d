use parksim::network::{
    build_cross_topology, build_parking_map, compute_gradients, count_router_load, parse_topology_file,
    route_next_hop, NetworkError, Node, Point, Role, Street, Topology, CROSS_GATEWAY_DISTANCE,
    CROSS_PITCH, PARKING_MAP,
};
use parksim::radio::RadioParams;
use parksim::scenario::{Scenario, TopologySpec};
use parksim::NodeId;
use proptest::prelude::*;

fn map_radio() -> RadioParams {
    let desc = parse_topology_file(PARKING_MAP).unwrap();
    RadioParams {
        ffd_tpo_dbm: desc.ffd_tpo_dbm().unwrap(),
        ..RadioParams::default()
    }
}

/// Arm direction and curb side of a cross sensor.
fn arm_and_side(p: Point) -> ((i32, i32), f64) {
    let dir = if p.x.abs() > p.y.abs() {
        (p.x.signum() as i32, 0)
    } else {
        (0, p.y.signum() as i32)
    };
    let side = (dir.0 as f64) * p.y - (dir.1 as f64) * p.x;
    (dir, side.signum())
}

#[test]
fn twelve_sensors_fill_one_side_of_four_arms() {
    let t = build_cross_topology(12).unwrap();
    assert_eq!(t.sensor_count(), 12);
    let mut per_arm = std::collections::BTreeMap::new();
    let mut sides = std::collections::BTreeSet::new();
    for s in t.sensors() {
        let (arm, side) = arm_and_side(s.position);
        *per_arm.entry(arm).or_insert(0) += 1;
        sides.insert(side as i32);
    }
    assert_eq!(per_arm.len(), 4);
    assert!(per_arm.values().all(|&c| c == 3));
    assert_eq!(sides.len(), 1);
}

#[test]
fn cross_spacing_is_uniform_for_every_size() {
    for n in [12, 24, 48, 96] {
        let t = build_cross_topology(n).unwrap();
        assert_eq!(t.sensor_count(), n);
        assert_eq!(t.repeater_count(), 0);
        let g = t.gateway();
        let nearest = t.sensors().map(|s| t.distance(g, s.id)).fold(f64::INFINITY, f64::min);
        assert!((nearest - CROSS_GATEWAY_DISTANCE).abs() < 1e-9);
        let mut rows: std::collections::BTreeMap<((i32, i32), i32), Vec<f64>> = Default::default();
        for s in t.sensors() {
            let (arm, side) = arm_and_side(s.position);
            let along = s.position.x.abs().max(s.position.y.abs());
            rows.entry((arm, side as i32)).or_default().push(along);
        }
        for v in rows.values_mut() {
            v.sort_by(f64::total_cmp);
            for w in v.windows(2) {
                assert!((w[1] - w[0] - CROSS_PITCH).abs() < 1e-9, "n={n}: {v:?}");
            }
        }
    }
}

#[test]
fn larger_cells_extend_smaller_ones() {
    let small = build_cross_topology(24).unwrap();
    let large = build_cross_topology(96).unwrap();
    for (a, b) in small.nodes().iter().zip(large.nodes()) {
        assert_eq!(a, b);
    }
}

#[test]
fn every_cross_sensor_attaches_to_the_gateway() {
    let radio = RadioParams::default();
    for n in [12, 24, 48, 96] {
        let t = build_cross_topology(n).unwrap();
        let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
        for s in t.sensors() {
            assert_eq!(route_next_hop(&table, s.id).unwrap(), t.gateway());
            assert_eq!(table.gradient[s.id.index()], Some(1));
        }
    }
}

#[test]
fn parking_map_links_close_with_margin() {
    let radio = map_radio();
    let t = build_parking_map(3.0).unwrap();
    assert_eq!(t.sensor_count(), 120);
    let links = t.link_table(&radio);
    let ffds: Vec<NodeId> = t.nodes().iter().filter(|n| n.role.is_ffd()).map(|n| n.id).collect();
    for s in t.sensors() {
        let best = ffds.iter().map(|&f| links.two_way_dbm(s.id, f)).fold(f64::NEG_INFINITY, f64::max);
        assert!(best >= radio.sensitivity_dbm + 10.0, "sensor {}: {best}", s.id);
    }
}

#[test]
fn lower_power_enables_more_repeaters() {
    let counts: Vec<usize> = [3.0, 0.0, -3.0, -7.0]
        .iter()
        .map(|&p| build_parking_map(p).unwrap().repeater_count())
        .collect();
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
    assert!(counts[3] > counts[0]);
    assert!(matches!(build_parking_map(-20.0), Err(NetworkError::UnsupportedTpo(_))));
}

#[test]
fn parking_map_routes_at_every_supported_power() {
    for tpo in [3.0, 0.0, -3.0, -7.0] {
        let radio = RadioParams {
            tpo_dbm: tpo,
            ..map_radio()
        };
        let t = build_parking_map(tpo).unwrap();
        let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
        assert_eq!(table.gradient[t.gateway().index()], Some(0));
        assert_eq!(table.parent[t.gateway().index()], None);
        let adjacent: Vec<&Node> = t
            .nodes()
            .iter()
            .filter(|n| n.role == Role::Repeater && t.distance(n.id, t.gateway()) <= 100.0 + 1e-9)
            .collect();
        assert!(!adjacent.is_empty());
        for r in adjacent {
            assert_eq!(table.gradient[r.id.index()], Some(1), "tpo {tpo}, repeater {}", r.id);
        }
    }
}

fn node(id: u32, role: Role, x: f64) -> Node {
    Node {
        id: NodeId(id),
        role,
        position: Point::new(x, 0.0),
        tier: None,
    }
}

fn line(nodes: Vec<Node>) -> Topology {
    let street = Street::new(Point::new(-10.0, 0.0), Point::new(2000.0, 0.0), 8.0);
    Topology::new(nodes, vec![street]).unwrap()
}

#[test]
fn sensor_with_one_repeater_in_range_uses_it() {
    let radio = RadioParams::default();
    let t = line(vec![
        node(0, Role::Gateway, 0.0),
        node(1, Role::Repeater, 70.0),
        node(2, Role::Sensor, 130.0),
    ]);
    let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
    assert_eq!(table.gradient[1], Some(1));
    assert_eq!(route_next_hop(&table, NodeId(2)).unwrap(), NodeId(1));
    assert_eq!(table.gradient[2], Some(2));
}

#[test]
fn gradient_ties_prefer_the_stronger_link() {
    let radio = RadioParams::default();
    let t = line(vec![
        node(0, Role::Gateway, 0.0),
        node(1, Role::Repeater, 60.0),
        node(2, Role::Repeater, 75.0),
        node(3, Role::Sensor, 130.0),
    ]);
    let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
    assert_eq!(table.gradient[1], Some(1));
    assert_eq!(table.gradient[2], Some(1));
    assert_eq!(route_next_hop(&table, NodeId(3)).unwrap(), NodeId(2));
}

#[test]
fn exact_ties_go_to_the_lower_id() {
    let radio = RadioParams::default();
    let street = Street::new(Point::new(0.0, -200.0), Point::new(0.0, 200.0), 8.0);
    let mk = |id, role, y| Node {
        id: NodeId(id),
        role,
        position: Point::new(0.0, y),
        tier: None,
    };
    let t = Topology::new(
        vec![
            mk(0, Role::Gateway, 0.0),
            mk(1, Role::Repeater, 50.0),
            mk(2, Role::Repeater, -50.0),
        ],
        vec![street],
    )
    .unwrap();
    let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
    assert_eq!(table.parent[1], Some(NodeId(0)));
    assert_eq!(table.parent[2], Some(NodeId(0)));
}

#[test]
fn unreachable_sensor_is_reported() {
    let radio = RadioParams::default();
    let t = line(vec![
        node(0, Role::Gateway, 0.0),
        node(1, Role::Sensor, 10.0),
        node(2, Role::Sensor, 1500.0),
    ]);
    match compute_gradients(&t, &t.link_table(&radio), &radio) {
        Err(NetworkError::Disconnected(ids)) => assert_eq!(ids, vec![NodeId(2)]),
        other => panic!("expected disconnection, got {other:?}"),
    }
}

#[test]
fn router_load_counts_every_repeater() {
    let t = build_parking_map(3.0).unwrap();
    let repeaters: Vec<NodeId> = t.nodes().iter().filter(|n| n.role == Role::Repeater).map(|n| n.id).collect();
    let trace = vec![repeaters[0], repeaters[0], repeaters[1], t.gateway()];
    let load = count_router_load(&t, trace);
    assert_eq!(load.len(), repeaters.len());
    assert_eq!(load[&repeaters[0]], 2);
    assert_eq!(load[&repeaters[1]], 1);
    assert_eq!(load.values().sum::<u64>(), 3);
}

#[test]
fn router_packets_are_conserved_in_simulation() {
    let mut s = Scenario::new("load", TopologySpec::ParkingMap);
    s.sim_time = 3600.0;
    s.radio.tpo_dbm = -7.0;
    let prepared = s.prepare().unwrap();
    let run = prepared[0].1.run(3, 0).unwrap();
    assert!(!run.routers.is_empty());
    let mut forwarded = 0;
    for (id, r) in &run.routers {
        assert_eq!(r.forwarded, r.received - r.dropped - r.queued, "router {id}");
        assert_eq!(run.router_load[id], r.forwarded);
        forwarded += r.forwarded;
    }
    assert!(forwarded > 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn routes_descend_to_the_gateway(tier in 0usize..4, margin in 0.0f64..10.0) {
        let tpo = [3.0, 0.0, -3.0, -7.0][tier];
        let radio = RadioParams { tpo_dbm: tpo, link_margin_db: margin, ..map_radio() };
        let t = build_parking_map(tpo).unwrap();
        let table = compute_gradients(&t, &t.link_table(&radio), &radio).unwrap();
        for n in t.nodes() {
            let Some(g) = table.gradient[n.id.index()] else { continue };
            let mut cur = n.id;
            let mut steps = 0;
            while cur != t.gateway() {
                let next = route_next_hop(&table, cur).unwrap();
                prop_assert_eq!(table.gradient[next.index()].unwrap() + 1, table.gradient[cur.index()].unwrap());
                cur = next;
                steps += 1;
                prop_assert!(steps <= t.len());
            }
            prop_assert_eq!(steps as u32, g);
        }
    }
}
