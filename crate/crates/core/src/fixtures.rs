//! Small hand-built instances shared by tests, examples and the CLI docs.

use crate::graph::Instance;

/// Depot 0, terminal 1, steiner node 2.
///
/// Arcs in id order: `0->1:25, 1->0:30, 0->2:20, 2->1:20, 1->2:22, 2->0:21`.
/// The optimal closed walk is `0->1->0` with cost 55.
pub fn t1() -> Instance {
    Instance::from_parts(
        &[0, 1, 2],
        &[1],
        &[
            (0, 1, 25.0),
            (1, 0, 30.0),
            (0, 2, 20.0),
            (2, 1, 20.0),
            (1, 2, 22.0),
            (2, 0, 21.0),
        ],
    )
    .expect("t1 is valid")
}

/// [`t1`] plus steiner node 3 hanging off node 2 (`2->3:40`, `3->2:45`).
pub fn t2() -> Instance {
    Instance::from_parts(
        &[0, 1, 2, 3],
        &[1],
        &[
            (0, 1, 25.0),
            (1, 0, 30.0),
            (0, 2, 20.0),
            (2, 1, 20.0),
            (1, 2, 22.0),
            (2, 0, 21.0),
            (2, 3, 40.0),
            (3, 2, 45.0),
        ],
    )
    .expect("t2 is valid")
}
