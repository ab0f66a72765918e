//! Builders for the datasets shipped with the tool.
//!
//! Each builder returns the complete dataset value; `write_all` renders them
//! to JSON files. The builders are the single source of truth for the shipped
//! geometry, so the files on disk and the expectations in the test suite can
//! never drift apart.

use std::f64::consts::PI;
use std::io;
use std::path::Path;

use nalgebra::DMatrix;

use gerbelab::clifford::lift_rotation;
use gerbelab::cover::{TransitionFamily, TransitionMaps};

use crate::dataset::{
    AxisEdgeSpec, ChartConnectionSpec, ChartEdgeSpec, ChartSpec, ChernExperiment,
    CohomologyExperiment, ConnectionLawExperiment, ConnectionSpec, CoverSpec, Dataset,
    EdgeRuleSpec, EllipticityExperiment, EntrySpec, ExperimentSpec, ExtraChainSpec, GeometrySpec,
    GradedIndexExperiment, GradingSpec, HarmonicVanishingExperiment, IndexPairingExperiment,
    JacobianSpec, LichnerowiczExperiment, LinkTargetSpec, MapData, MatrixOperatorSpec, MatrixSpec,
    OperatorSpec, OverlapSpec, PartitionSpec, PieceSpec, ScalarField, SectionValuesSpec,
    SectionsSpec, SpectrumExperiment, SymbolInvarianceExperiment, TermSpec, TransitionEntry,
    TransitionsSpec, TripleSpec, ValidateExperiment, SCHEMA,
};

fn base(name: &str, description: &str, cover: CoverSpec, transitions: TransitionsSpec) -> Dataset {
    Dataset {
        schema: SCHEMA.to_string(),
        name: name.to_string(),
        description: description.to_string(),
        cover,
        transitions,
        band: None,
        extra_chains: Vec::new(),
        metrics: None,
        connection: None,
        levi_civita: None,
        frame_scales: None,
        scalar_curvature: None,
        operator: None,
        operator_matrix: None,
        edges: None,
        grading: None,
        sections: SectionsSpec::default(),
        experiments: Vec::new(),
    }
}

fn entry(from: usize, to: usize, component: usize, data: MapData) -> TransitionEntry {
    TransitionEntry { from, to, component, data }
}

fn scalar(v: f64) -> MatrixSpec {
    MatrixSpec { rows: 1, cols: 1, re: vec![v], im: None }
}

fn scalar_im(v: f64) -> MatrixSpec {
    MatrixSpec { rows: 1, cols: 1, re: vec![0.0], im: Some(vec![v]) }
}

fn square(n: usize, re: Vec<f64>) -> MatrixSpec {
    MatrixSpec { rows: n, cols: n, re, im: None }
}

fn scaled_ident(n: usize, v: f64) -> MatrixSpec {
    MatrixSpec::from_real(&(DMatrix::identity(n, n) * v))
}

// ---------------------------------------------------------------------------
// Circle: two arc charts, four-sample overlaps at both junctions.

const CIRCLE_LEN: usize = 132;
const CIRCLE_LAP: usize = 4;

fn circle_base(name: &str, description: &str, wrap: f64) -> Dataset {
    let h = PI / 128.0;
    let charts = (0..2)
        .map(|c| ChartSpec {
            id: c,
            geometry: GeometrySpec::Grid {
                shape: vec![CIRCLE_LEN],
                spacing: vec![h],
                origin: vec![c as f64 * PI],
            },
            weights: ScalarField::Constant(h),
        })
        .collect();
    let overlaps = vec![
        OverlapSpec {
            charts: [0, 1],
            component: 0,
            pairs: (0..CIRCLE_LAP).map(|k| [128 + k, k]).collect(),
        },
        OverlapSpec {
            charts: [0, 1],
            component: 1,
            pairs: (0..CIRCLE_LAP).map(|k| [k, 128 + k]).collect(),
        },
    ];
    let maps = vec![
        entry(1, 0, 0, MapData::Constant(scalar(1.0))),
        entry(0, 1, 0, MapData::Constant(scalar(1.0))),
        entry(1, 0, 1, MapData::Constant(scalar(wrap))),
        entry(0, 1, 1, MapData::Constant(scalar(wrap))),
    ];
    base(
        name,
        description,
        CoverSpec { charts, overlaps, triples: Vec::new(), quadruples: Vec::new() },
        TransitionsSpec { fiber_dim: 1, lift: false, maps },
    )
}

fn circle_spectral(
    name: &str,
    description: &str,
    wrap: f64,
    expect_kernel: usize,
    gap: f64,
    smallest: Option<f64>,
) -> Dataset {
    let mut ds = circle_base(name, description, wrap);
    ds.operator = Some(OperatorSpec {
        fiber_dim: 1,
        terms: vec![TermSpec {
            alpha: vec![1],
            coeffs: vec![
                MapData::Constant(scalar_im(1.0)),
                MapData::Constant(scalar_im(1.0)),
            ],
        }],
    });
    ds.edges = Some(vec![
        ChartEdgeSpec {
            axes: vec![AxisEdgeSpec {
                low: EdgeRuleSpec::Link {
                    targets: vec![LinkTargetSpec { chart: 1, sample: 127, map: scalar(wrap) }],
                },
                high: EdgeRuleSpec::OneSided { width: 1 },
            }],
        },
        ChartEdgeSpec {
            axes: vec![AxisEdgeSpec {
                low: EdgeRuleSpec::Link {
                    targets: vec![LinkTargetSpec { chart: 0, sample: 127, map: scalar(1.0) }],
                },
                high: EdgeRuleSpec::Link {
                    targets: vec![LinkTargetSpec { chart: 0, sample: 4, map: scalar(wrap) }],
                },
            }],
        },
    ]);
    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some("trivial".into()),
        }),
        ExperimentSpec::Spectrum(SpectrumExperiment {
            threshold: None,
            seed: 11,
            expect_kernel: Some(expect_kernel),
            expect_gap_at_least: Some(gap),
            expect_smallest: smallest,
            magnitude_tolerance: 1e-3,
        }),
        ExperimentSpec::Ellipticity(EllipticityExperiment::default()),
    ];
    ds
}

pub fn s1_periodic() -> Dataset {
    circle_spectral(
        "s1_periodic",
        "First derivative on a 256-point circle split over two arc charts \
         with plain gluing; constants survive, so the kernel is one.",
        1.0,
        1,
        0.99,
        None,
    )
}

pub fn s1_antiperiodic() -> Dataset {
    circle_spectral(
        "s1_antiperiodic",
        "First derivative on the same two-chart circle with a sign flip at \
         one junction; the kernel empties and the spectrum starts at one half.",
        -1.0,
        0,
        0.49,
        Some(0.5),
    )
}

pub fn s1_halfangle() -> Dataset {
    let mut ds = circle_base(
        "s1_halfangle",
        "Sign-twisted circle chain carrying a stored half-frequency section, \
         two partitions of unity that hand the overlaps to different charts, \
         and an untwisted auxiliary chain with a whole-frequency section.",
        -1.0,
    );
    let h = PI / 128.0;
    let indicator: Vec<f64> = (0..CIRCLE_LEN)
        .map(|k| if (CIRCLE_LAP..=127).contains(&k) { 1.0 } else { 0.0 })
        .collect();
    let phase_row = |freq: f64, chart: usize| -> MatrixSpec {
        let origin = chart as f64 * PI;
        let m = DMatrix::from_fn(1, CIRCLE_LEN, |_, k| {
            let t = freq * (origin + k as f64 * h);
            gerbelab::linalg::C64::new(t.cos(), t.sin())
        });
        MatrixSpec::from_complex(&m)
    };
    ds.sections = SectionsSpec {
        partitions: vec![
            PartitionSpec {
                name: "handoff".into(),
                pieces: vec![
                    PieceSpec { chart: 0, weights: ScalarField::Samples(indicator.clone()) },
                    PieceSpec { chart: 1, weights: ScalarField::Constant(1.0) },
                ],
            },
            PartitionSpec {
                name: "owner".into(),
                pieces: vec![
                    PieceSpec { chart: 0, weights: ScalarField::Constant(1.0) },
                    PieceSpec { chart: 1, weights: ScalarField::Samples(indicator) },
                ],
            },
        ],
        sections: vec![
            SectionValuesSpec {
                name: "half".into(),
                chain: "main".into(),
                values: vec![phase_row(0.5, 0), phase_row(0.5, 1)],
            },
            SectionValuesSpec {
                name: "whole".into(),
                chain: "aux".into(),
                values: vec![phase_row(1.0, 0), phase_row(1.0, 1)],
            },
        ],
    };
    ds.extra_chains = vec![ExtraChainSpec {
        name: "aux".into(),
        transitions: TransitionsSpec {
            fiber_dim: 1,
            lift: false,
            maps: vec![
                entry(1, 0, 0, MapData::Constant(scalar(1.0))),
                entry(0, 1, 0, MapData::Constant(scalar(1.0))),
                entry(1, 0, 1, MapData::Constant(scalar(1.0))),
                entry(0, 1, 1, MapData::Constant(scalar(1.0))),
            ],
        },
    }];
    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some("trivial".into()),
        }),
        ExperimentSpec::Sections(Default::default()),
    ];
    ds
}

// ---------------------------------------------------------------------------
// Sphere by tetrahedral arcs: four charts, one great-circle arc per pair.

fn tetra_others(chart: usize) -> [usize; 3] {
    let mut out = [0usize; 3];
    let mut n = 0;
    for v in 0..4 {
        if v != chart {
            out[n] = v;
            n += 1;
        }
    }
    out
}

fn tetra_pair_rest(i: usize, j: usize) -> (usize, usize) {
    let mut rest = (0..4).filter(|&v| v != i && v != j);
    let a = rest.next().unwrap();
    let b = rest.next().unwrap();
    (a, b)
}

fn tetra(name: &str, description: &str, winding: f64, class: &str) -> Dataset {
    let s3 = 1.0 / 3.0_f64.sqrt();
    let verts: [[f64; 3]; 4] =
        [[s3, s3, s3], [s3, -s3, -s3], [-s3, s3, -s3], [-s3, -s3, s3]];
    let arc_point = |x: usize, y: usize, s: usize| -> Vec<f64> {
        let t = s as f64 / 8.0;
        let p: Vec<f64> = (0..3).map(|d| (1.0 - t) * verts[x][d] + t * verts[y][d]).collect();
        let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
        p.into_iter().map(|v| v / norm).collect()
    };
    let chart_arcs = |vs: [usize; 3]| [(vs[0], vs[1]), (vs[0], vs[2]), (vs[1], vs[2])];
    let index_in_chart = |chart: usize, x: usize, y: usize, s: usize| -> usize {
        let vs = tetra_others(chart);
        if s == 0 {
            return vs.iter().position(|&v| v == x).unwrap();
        }
        if s == 8 {
            return vs.iter().position(|&v| v == y).unwrap();
        }
        let arcno = chart_arcs(vs).iter().position(|&a| a == (x, y)).unwrap();
        3 + arcno * 7 + (s - 1)
    };

    let charts = (0..4)
        .map(|i| {
            let vs = tetra_others(i);
            let mut points: Vec<Vec<f64>> = vs.iter().map(|&v| verts[v].to_vec()).collect();
            for (x, y) in chart_arcs(vs) {
                for s in 1..8 {
                    points.push(arc_point(x, y, s));
                }
            }
            ChartSpec {
                id: i,
                geometry: GeometrySpec::Cloud { points },
                weights: ScalarField::Constant((-1.0f64 / 3.0).acos() / 8.0),
            }
        })
        .collect();

    let mut overlaps = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            let (x, y) = tetra_pair_rest(i, j);
            overlaps.push(OverlapSpec {
                charts: [i, j],
                component: 0,
                pairs: (0..=8)
                    .map(|s| [index_in_chart(i, x, y, s), index_in_chart(j, x, y, s)])
                    .collect(),
            });
        }
    }

    let mut triples = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            for k in j + 1..4 {
                let v = 6 - i - j - k;
                let pos = |a: usize, b: usize| -> usize {
                    let (x, _) = tetra_pair_rest(a, b);
                    if v == x {
                        0
                    } else {
                        8
                    }
                };
                triples.push(TripleSpec {
                    charts: [i, j, k],
                    ij: [0, pos(i, j)],
                    jk: [0, pos(j, k)],
                    ik: [0, pos(i, k)],
                });
            }
        }
    }

    let rot3z = |t: f64| -> MatrixSpec {
        square(
            3,
            vec![t.cos(), -t.sin(), 0.0, t.sin(), t.cos(), 0.0, 0.0, 0.0, 1.0],
        )
    };
    let mut maps = Vec::new();
    for i in 0..4 {
        for j in i + 1..4 {
            if (i, j) == (0, 1) {
                let fw = (0..=8).map(|s| rot3z(winding * s as f64 * PI / 4.0)).collect();
                let bw = (0..=8).map(|s| rot3z(-winding * s as f64 * PI / 4.0)).collect();
                maps.push(entry(1, 0, 0, MapData::PerSample(fw)));
                maps.push(entry(0, 1, 0, MapData::PerSample(bw)));
            } else {
                maps.push(entry(j, i, 0, MapData::Constant(scaled_ident(3, 1.0))));
                maps.push(entry(i, j, 0, MapData::Constant(scaled_ident(3, 1.0))));
            }
        }
    }

    let mut ds = base(
        name,
        description,
        CoverSpec { charts, overlaps, triples, quadruples: Vec::new() },
        TransitionsSpec { fiber_dim: 3, lift: true, maps },
    );
    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some(class.into()),
        }),
        ExperimentSpec::Cohomology(CohomologyExperiment { expect_class: Some(class.into()) }),
    ];
    ds
}

pub fn s2_clutched() -> Dataset {
    tetra(
        "s2_clutched",
        "Tetrahedral arc cover of the sphere whose frame rotates once around \
         the vertical axis along a single arc; the lift signs cannot be \
         scrubbed away by any vertex assignment.",
        1.0,
        "nontrivial",
    )
}

pub fn s2_frame() -> Dataset {
    tetra(
        "s2_frame",
        "The same tetrahedral cover with the frame rotating twice along that \
         arc, matching the clutching of the actual tangent frame bundle; the \
         lift signs all cancel.",
        2.0,
        "trivial",
    )
}

// ---------------------------------------------------------------------------
// Flat torus: one periodic chart, zero frame connection.

pub fn t2_flat_64() -> Dataset {
    let n = 64usize;
    let h = 2.0 * PI / n as f64;
    let cover = CoverSpec {
        charts: vec![ChartSpec {
            id: 0,
            geometry: GeometrySpec::Grid {
                shape: vec![n, n],
                spacing: vec![h, h],
                origin: vec![0.0, 0.0],
            },
            weights: ScalarField::Constant(h * h),
        }],
        overlaps: Vec::new(),
        triples: Vec::new(),
        quadruples: Vec::new(),
    };
    let mut ds = base(
        "t2_flat_64",
        "Flat square torus on a single 64 by 64 periodic chart. The squared \
         operator reproduces the connection Laplacian exactly, stencil by \
         stencil, so the defect row norm sits at rounding level.",
        cover,
        TransitionsSpec { fiber_dim: 2, lift: true, maps: Vec::new() },
    );
    let zero2 = square(2, vec![0.0; 4]);
    ds.levi_civita = Some(ConnectionSpec {
        fiber_dim: 2,
        charts: vec![ChartConnectionSpec {
            axes: vec![MapData::Constant(zero2.clone()), MapData::Constant(zero2)],
        }],
        jacobians: Vec::new(),
    });
    ds.scalar_curvature = Some(vec![ScalarField::Constant(0.0)]);
    ds.edges = Some(vec![ChartEdgeSpec {
        axes: (0..2)
            .map(|_| AxisEdgeSpec {
                low: EdgeRuleSpec::Periodic { twists: vec![scaled_ident(4, 1.0)] },
                high: EdgeRuleSpec::Periodic { twists: vec![scaled_ident(4, 1.0)] },
            })
            .collect(),
    }]);
    ds.grading = Some(GradingSpec::Parity);
    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some("trivial".into()),
        }),
        ExperimentSpec::Lichnerowicz(LichnerowiczExperiment {
            tolerance: Some(1e-8),
            exclusion_depth: 0,
            probes: Vec::new(),
        }),
        ExperimentSpec::Ellipticity(EllipticityExperiment::default()),
    ];
    ds
}

// ---------------------------------------------------------------------------
// Round sphere: two mirrored polar caps overlapping in an equatorial band.

/// Orientation conventions for the round sphere builder. The shipped values
/// are the ones under which the stored smooth section satisfies the first
/// order equation; the survey test in the integration suite pins them.
#[derive(Debug, Clone, Copy)]
pub struct SphereSigns {
    /// Sign on the across-pole transport block.
    pub pole: f64,
    /// Sign of the azimuthal wrap twist.
    pub azimuth: f64,
    /// Sign of the frame connection coefficient.
    pub connection: f64,
}

pub const SPHERE_SIGNS: SphereSigns =
    SphereSigns { pole: 1.0, azimuth: -1.0, connection: 1.0 };

/// Left multiplication by the positive plane element, the spin transport for
/// a half turn of the frame. Stepping a meridian across the pole lands at
/// azimuth plus pi, and this block carries the value back to the stepping
/// meridian's gauge.
fn pole_block() -> DMatrix<f64> {
    let half_turn = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -1.0]);
    let (a, b) = lift_rotation(&half_turn).expect("half turn lifts");
    let m = a.element().left_mul_matrix();
    if m[(3, 0)] > 0.0 {
        m
    } else {
        b.element().left_mul_matrix()
    }
}

fn constant_block(chain: &TransitionFamily, key: (usize, usize, usize)) -> DMatrix<f64> {
    let maps = chain.maps.get(&key).expect("seam block");
    let first = maps.at(0).clone();
    if let TransitionMaps::PerSample(all) = maps {
        for m in all {
            let drift = (m - &first).iter().map(|v| v.norm()).fold(0.0, f64::max);
            assert!(drift < 1e-12, "seam lift is constant");
        }
    }
    first.map(|v| v.re)
}

/// Values of the smooth spinor whose covariant derivative is half the
/// Clifford action of the direction, written in the polar gauge. Components
/// follow the fiber basis order: unit, first frame vector, second frame
/// vector, plane element.
fn killing_column(th: f64, ph: f64) -> [f64; 4] {
    let (ct, st) = ((0.5 * th).cos(), (0.5 * th).sin());
    let (cp, sp) = ((0.5 * ph).cos(), (0.5 * ph).sin());
    [ct * cp, st * cp, st * sp, -ct * sp]
}

pub fn s2_round_custom(
    name: &str,
    description: &str,
    m: usize,
    n_phi: usize,
    lich_tolerance: Option<f64>,
    signs: &SphereSigns,
) -> Dataset {
    assert!(m % 3 == 0 && (2 * m / 3) % 2 == 0 && n_phi % 2 == 0);
    let n_theta = 2 * m / 3;
    let h_th = PI / m as f64;
    let h_ph = 2.0 * PI / n_phi as f64;
    let theta = |i: usize| (i as f64 + 0.5) * h_th;
    let samples = n_theta * n_phi;
    let row_weights: Vec<f64> =
        (0..samples).map(|s| theta(s / n_phi).sin() * h_th * h_ph).collect();

    let charts = (0..2)
        .map(|c| ChartSpec {
            id: c,
            geometry: GeometrySpec::Grid {
                shape: vec![n_theta, n_phi],
                spacing: vec![h_th, h_ph],
                // The second cap's azimuth grid sits half a step off, so the
                // mirror identification never crosses the azimuth origin.
                origin: vec![0.5 * h_th, if c == 0 { 0.0 } else { 0.5 * h_ph }],
            },
            weights: ScalarField::Samples(row_weights.clone()),
        })
        .collect();

    let mut pairs = Vec::with_capacity((n_theta - m / 3) * n_phi);
    for i in m / 3..n_theta {
        for j in 0..n_phi {
            pairs.push([i * n_phi + j, (m - 1 - i) * n_phi + (n_phi - 1 - j)]);
        }
    }
    let overlaps = vec![OverlapSpec { charts: [0, 1], component: 0, pairs }];

    let minus2 = square(2, vec![-1.0, 0.0, 0.0, -1.0]);
    let transitions = TransitionsSpec {
        fiber_dim: 2,
        lift: true,
        maps: vec![
            entry(1, 0, 0, MapData::Constant(minus2.clone())),
            entry(0, 1, 0, MapData::Constant(minus2.clone())),
        ],
    };

    let mut ds = base(
        name,
        description,
        CoverSpec { charts, overlaps, triples: Vec::new(), quadruples: Vec::new() },
        transitions,
    );

    // The seam transport on the spinor fiber comes from the compiled lift of
    // the constant half-turn, so the edge rules can never drift from the
    // chain the sections glue by.
    let bootstrap = ds.compile().expect("sphere cover with lifted transitions compiles");
    let seam = [
        constant_block(&bootstrap.chain, (0, 1, 0)),
        constant_block(&bootstrap.chain, (1, 0, 0)),
    ];
    drop(bootstrap);

    let spin_axis: Vec<MatrixSpec> = (0..samples)
        .map(|s| {
            let w = signs.connection * theta(s / n_phi).cos();
            square(2, vec![0.0, -w, w, 0.0])
        })
        .collect();
    ds.levi_civita = Some(ConnectionSpec {
        fiber_dim: 2,
        charts: (0..2)
            .map(|_| ChartConnectionSpec {
                axes: vec![
                    MapData::Constant(square(2, vec![0.0; 4])),
                    MapData::PerSample(spin_axis.clone()),
                ],
            })
            .collect(),
        jacobians: vec![
            JacobianSpec { from: 0, to: 1, component: 0, matrix: minus2.clone() },
            JacobianSpec { from: 1, to: 0, component: 0, matrix: minus2 },
        ],
    });
    ds.frame_scales = Some(
        (0..2)
            .map(|_| {
                vec![
                    ScalarField::Constant(1.0),
                    ScalarField::Samples(
                        (0..samples).map(|s| 1.0 / theta(s / n_phi).sin()).collect(),
                    ),
                ]
            })
            .collect(),
    );
    ds.scalar_curvature =
        Some(vec![ScalarField::Constant(2.0), ScalarField::Constant(2.0)]);

    let pole = pole_block();
    let edges = (0..2)
        .map(|c| ChartEdgeSpec {
            axes: vec![
                AxisEdgeSpec {
                    low: EdgeRuleSpec::Link {
                        targets: (0..n_phi)
                            .map(|j| {
                                // Values are antiperiodic in azimuth, so the
                                // columns whose antipode wraps past the
                                // origin pick up the wrap sign.
                                let sgn = if j < n_phi / 2 {
                                    signs.pole
                                } else {
                                    -signs.pole
                                };
                                LinkTargetSpec {
                                    chart: c,
                                    sample: (j + n_phi / 2) % n_phi,
                                    map: MatrixSpec::from_real(&(&pole * sgn)),
                                }
                            })
                            .collect(),
                    },
                    high: EdgeRuleSpec::Link {
                        targets: (0..n_phi)
                            .map(|j| LinkTargetSpec {
                                chart: 1 - c,
                                sample: (m / 3 - 1) * n_phi + (n_phi - 1 - j),
                                map: MatrixSpec::from_real(&seam[c]),
                            })
                            .collect(),
                    },
                },
                AxisEdgeSpec {
                    low: EdgeRuleSpec::Periodic {
                        twists: vec![scaled_ident(4, signs.azimuth)],
                    },
                    high: EdgeRuleSpec::Periodic {
                        twists: vec![scaled_ident(4, signs.azimuth)],
                    },
                },
            ],
        })
        .collect();
    ds.edges = Some(edges);
    ds.grading = Some(GradingSpec::Parity);

    // Chart 1 stores the same global section, rewritten through the seam
    // block at the mirrored coordinates.
    let c_az = 2.0 * PI - 0.5 * h_ph;
    let psi0 = DMatrix::from_fn(4, samples, |r, s| {
        killing_column(theta(s / n_phi), (s % n_phi) as f64 * h_ph)[r]
    });
    let psi1 = {
        let mut out = DMatrix::zeros(4, samples);
        for s in 0..samples {
            let col = killing_column(
                PI - theta(s / n_phi),
                c_az - ((s % n_phi) as f64 + 0.5) * h_ph,
            );
            for r in 0..4 {
                let mut acc = 0.0;
                for k in 0..4 {
                    acc += seam[1][(r, k)] * col[k];
                }
                out[(r, s)] = acc;
            }
        }
        out
    };
    ds.sections = SectionsSpec {
        partitions: Vec::new(),
        sections: vec![SectionValuesSpec {
            name: "killing".into(),
            chain: "spinor".into(),
            values: vec![MatrixSpec::from_real(&psi0), MatrixSpec::from_real(&psi1)],
        }],
    };

    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some("trivial".into()),
        }),
        ExperimentSpec::ConnectionLaw(ConnectionLawExperiment { slope: 1.0 }),
        ExperimentSpec::Sections(Default::default()),
        ExperimentSpec::Lichnerowicz(LichnerowiczExperiment {
            tolerance: lich_tolerance,
            exclusion_depth: 0,
            probes: vec!["killing".into()],
        }),
        ExperimentSpec::HarmonicVanishing(HarmonicVanishingExperiment {
            declared_bound: Some(1.0),
            slack: 0.2,
            threshold: None,
            seed: 11,
        }),
        ExperimentSpec::Ellipticity(EllipticityExperiment::default()),
    ];
    ds
}

const SPHERE_DESCRIPTION: &str = "Round sphere on two mirrored polar caps \
     overlapping in an equatorial band, with the frame connection, diagonal \
     vielbein, curvature, and a stored smooth spinor probe.";

pub fn s2_round_32() -> Dataset {
    s2_round_custom("s2_round_32", SPHERE_DESCRIPTION, 48, 32, None, &SPHERE_SIGNS)
}

pub fn s2_round_64() -> Dataset {
    s2_round_custom("s2_round_64", SPHERE_DESCRIPTION, 96, 64, None, &SPHERE_SIGNS)
}

// ---------------------------------------------------------------------------
// Twisted torus family: flux datasets in the magnetic eigenbasis, plus an
// untwisted stencil operator at flux zero.

fn flux_name(d: i64) -> String {
    if d < 0 {
        format!("t2_twisted_dm{}", -d)
    } else {
        format!("t2_twisted_d{}", d)
    }
}

pub fn t2_twisted(d: i64) -> Dataset {
    let n = 33usize;
    let h = 2.0 * PI / n as f64;
    let cover = CoverSpec {
        charts: vec![ChartSpec {
            id: 0,
            geometry: GeometrySpec::Grid {
                shape: vec![n, n],
                spacing: vec![h, h],
                origin: vec![0.0, 0.0],
            },
            weights: ScalarField::Constant(h * h),
        }],
        overlaps: Vec::new(),
        triples: Vec::new(),
        quadruples: Vec::new(),
    };

    if d == 0 {
        let mut ds = base(
            &flux_name(0),
            "Square torus with no flux: a two-component stencil operator \
             with constant off-diagonal symbols, flat line bundle, zero \
             curvature integral, and a matched pair of constant kernels.",
            cover,
            TransitionsSpec { fiber_dim: 2, lift: false, maps: Vec::new() },
        );
        ds.operator = Some(OperatorSpec {
            fiber_dim: 2,
            terms: vec![
                TermSpec {
                    alpha: vec![1, 0],
                    coeffs: vec![MapData::Constant(square(2, vec![0.0, 1.0, 1.0, 0.0]))],
                },
                TermSpec {
                    alpha: vec![0, 1],
                    coeffs: vec![MapData::Constant(MatrixSpec {
                        rows: 2,
                        cols: 2,
                        re: vec![0.0; 4],
                        im: Some(vec![0.0, -1.0, 1.0, 0.0]),
                    })],
                },
            ],
        });
        ds.edges = Some(vec![ChartEdgeSpec {
            axes: (0..2)
                .map(|_| AxisEdgeSpec {
                    low: EdgeRuleSpec::Periodic { twists: vec![scaled_ident(2, 1.0)] },
                    high: EdgeRuleSpec::Periodic { twists: vec![scaled_ident(2, 1.0)] },
                })
                .collect(),
        }]);
        ds.grading = Some(GradingSpec::FiberSigns(vec![1.0, -1.0]));
        ds.connection = Some(ConnectionSpec {
            fiber_dim: 1,
            charts: vec![ChartConnectionSpec {
                axes: vec![
                    MapData::Constant(scalar(0.0)),
                    MapData::Constant(scalar(0.0)),
                ],
            }],
            jacobians: Vec::new(),
        });
        ds.experiments = vec![
            ExperimentSpec::Validate(ValidateExperiment {
                tolerance: 1e-8,
                expect_class: Some("trivial".into()),
            }),
            ExperimentSpec::Spectrum(SpectrumExperiment {
                threshold: None,
                seed: 11,
                expect_kernel: Some(2),
                expect_gap_at_least: Some(0.9),
                expect_smallest: None,
                magnitude_tolerance: 1e-3,
            }),
            ExperimentSpec::GradedIndex(GradedIndexExperiment {
                threshold: None,
                seed: 13,
                expect: Some(0),
            }),
            ExperimentSpec::Chern(ChernExperiment {
                expect_integer: Some(0),
                tolerance: 1e-3,
            }),
            ExperimentSpec::Ellipticity(EllipticityExperiment::default()),
            ExperimentSpec::IndexPairing(IndexPairingExperiment {
                candidate_form: Some("unit".into()),
                tolerance: 1e-3,
            }),
        ];
        return ds;
    }

    let dd = d.unsigned_abs() as usize;
    let levels = 8usize;
    let dim = (2 * levels + 1) * dd;
    let plus = (levels + 1) * dd;
    let mut entries = Vec::with_capacity(2 * levels * dd);
    for level in 1..=levels {
        // Ladder coefficient: the flux quantum spacing is |d| / pi on this
        // torus, and level n couples with the square root of n times it.
        let sv = (level as f64 * dd as f64 / PI).sqrt();
        for q in 0..dd {
            let pcol = level * dd + q;
            let mrow = plus + (level - 1) * dd + q;
            entries.push(EntrySpec { row: mrow, col: pcol, re: sv, im: 0.0 });
            entries.push(EntrySpec { row: pcol, col: mrow, re: sv, im: 0.0 });
        }
    }
    let sgn = if d > 0 { 1.0 } else { -1.0 };
    let grading = (0..dim).map(|k| if k < plus { sgn } else { -sgn }).collect();

    let mut ds = base(
        &flux_name(d),
        "Square torus threaded by quantized flux. The operator is stated in \
         the magnetic translation eigenbasis, where each level couples by a \
         ladder coefficient and the lowest level on one side is free; the \
         stored connection integrates to the same flux.",
        cover,
        TransitionsSpec { fiber_dim: 1, lift: false, maps: Vec::new() },
    );
    ds.operator_matrix = Some(MatrixOperatorSpec {
        dim,
        basis: "magnetic-eigenbasis".into(),
        grading,
        entries,
    });
    ds.connection = Some(ConnectionSpec {
        fiber_dim: 1,
        charts: vec![ChartConnectionSpec {
            axes: vec![
                MapData::Constant(scalar(0.0)),
                MapData::PerSample(
                    (0..n * n)
                        .map(|s| scalar_im(-(d as f64) * (s / n) as f64 / n as f64))
                        .collect(),
                ),
            ],
        }],
        jacobians: Vec::new(),
    });
    ds.experiments = vec![
        ExperimentSpec::Validate(ValidateExperiment {
            tolerance: 1e-8,
            expect_class: Some("trivial".into()),
        }),
        ExperimentSpec::Spectrum(SpectrumExperiment {
            threshold: None,
            seed: 11,
            expect_kernel: Some(dd),
            expect_gap_at_least: Some(0.5),
            expect_smallest: None,
            magnitude_tolerance: 1e-3,
        }),
        ExperimentSpec::GradedIndex(GradedIndexExperiment {
            threshold: None,
            seed: 13,
            expect: Some(d),
        }),
        ExperimentSpec::Chern(ChernExperiment { expect_integer: Some(d), tolerance: 1e-3 }),
        ExperimentSpec::SymbolInvariance(SymbolInvarianceExperiment {
            count: 10,
            norm: 0.3,
            seed: 17,
            threshold: None,
        }),
        ExperimentSpec::IndexPairing(IndexPairingExperiment {
            candidate_form: Some("unit".into()),
            tolerance: 1e-3,
        }),
    ];
    ds
}

// ---------------------------------------------------------------------------

pub fn all() -> Vec<Dataset> {
    vec![
        s1_periodic(),
        s1_antiperiodic(),
        s1_halfangle(),
        s2_clutched(),
        s2_frame(),
        t2_flat_64(),
        s2_round_32(),
        s2_round_64(),
        t2_twisted(-2),
        t2_twisted(-1),
        t2_twisted(0),
        t2_twisted(1),
        t2_twisted(2),
    ]
}

pub fn write_all(dir: &Path) -> io::Result<Vec<String>> {
    std::fs::create_dir_all(dir)?;
    let mut names = Vec::new();
    for ds in all() {
        std::fs::write(dir.join(format!("{}.json", ds.name)), ds.to_json())?;
        names.push(ds.name);
    }
    Ok(names)
}
