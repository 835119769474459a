// temporary probe, to be deleted
use nlos::forward::{render_transient, FftTransport, Transport};
use nlos::{SceneGrid, VoxelAlbedo};

#[test]
fn probe_single_voxel() {
    let g = SceneGrid::new(16, 16, 32, 64, 1.0, 0.012).unwrap();
    let mut u = VoxelAlbedo::zeros(g);
    u.data[[8, 8, 16]] = 1.0;
    let exact = render_transient(&u).unwrap();
    let approx = FftTransport::new(g).forward(&u).unwrap();
    for (name, t) in [("exact", &exact), ("approx", &approx)] {
        println!("--- {name} at scan (8,8):");
        for it in 0..g.nt {
            let v = t.data[[8, 8, it]];
            if v != 0.0 {
                println!("  bin {it}: {v:.4}");
            }
        }
        println!("--- {name} at scan (4,8):");
        for it in 0..g.nt {
            let v = t.data[[4, 8, it]];
            if v != 0.0 {
                println!("  bin {it}: {v:.4}");
            }
        }
        let total: f64 = t.data.iter().sum();
        println!("  total sum {total:.4}");
    }
}
