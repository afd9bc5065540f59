use daqn::abstraction::{project, AbstractSchema};
use daqn::gridworld::{bundled, reset};

#[test]
fn four_rooms_layout() {
    let w = bundled::four_rooms();
    assert_eq!(w.rooms.len(), 4);
    assert_eq!(w.goal_rooms().count(), 1);
    assert_eq!(w.num_keys, 0);
    assert_eq!(w.step_limit, Some(10_000));
}

#[test]
fn toy_mr_layout() {
    let w = bundled::toy_mr();
    assert_eq!(w.rooms.len(), 24);
    assert_eq!((w.num_keys, w.num_doors), (4, 4));
    assert_eq!(w.goal_rooms().count(), 1);
    assert_eq!(reset(&w, 0).lives_left, 1);
    assert_eq!(reset(&bundled::toy_mr_with_lives(5), 9).lives_left, 5);
}

#[test]
fn start_projects_to_start_sector_with_clear_flags() {
    let w = bundled::toy_mr();
    let schema = AbstractSchema::load(bundled::TOY_MR_SCHEMA, &w).unwrap();
    let s = project(&reset(&w, 3), &w, &schema);
    assert_eq!(w.sector_room[s.0[0] as usize], w.start_room);
    assert!(s.0[1..].iter().all(|&v| v == 0));
}
