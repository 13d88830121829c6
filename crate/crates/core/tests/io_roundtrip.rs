use rstlab::experiments::estimate_psi_tail;
use rstlab::exploration::{explore, renewal_increments, Constants};
use rstlab::io::{
    read_points, read_tree, write_points, write_renewals, write_tail, write_trace, write_tree,
};
use rstlab::ppp::{sample_ball, LazyField, RegionSpec};
use rstlab::tree::build_rst;
use rstlab::Vector;

fn text(buf: Vec<u8>) -> String {
    String::from_utf8(buf).unwrap()
}

#[test]
fn points_and_tree_round_trip_exactly() {
    let pts = sample_ball(3, 4.0, 12).unwrap();
    let mut buf = Vec::new();
    write_points(&mut buf, &pts).unwrap();
    let back = read_points(buf.as_slice()).unwrap();
    assert_eq!(back.points(), pts.points());
    assert_eq!(back.ids(), pts.ids());

    let tree = build_rst(&back);
    let mut tbuf = Vec::new();
    write_tree(&mut tbuf, &tree).unwrap();
    let tree_back = read_tree(tbuf.as_slice(), back.clone()).unwrap();
    assert_eq!(tree_back.parents(), tree.parents());
    assert_eq!(build_rst(&back).parents(), build_rst(&pts).parents());
}

#[test]
fn trace_columns_and_flags() {
    let pi0 = Vector::on_first_axis(2, 40.0);
    let pts = LazyField::with_seed(2, 8).realize(&RegionSpec::Ball { radius: 40.0 }).unwrap();
    let run = explore(&pi0, &pts.index(), &Constants::for_dim(2)).unwrap();
    let mut buf = Vec::new();
    write_trace(&mut buf, &run).unwrap();
    let out = text(buf);
    let mut lines = out.lines();
    assert_eq!(lines.next().unwrap(), "n,x1,x2,R,r,L,is_tau,is_Q,is_w,theta");
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), run.path.len());
    for (n, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), n);
        let r: f64 = row[3].parse().unwrap();
        assert_eq!(r, run.stats[n].radius);
        assert_eq!(row[9] == "1", n == run.trace.theta);
        assert_eq!(row[6] == "1", run.trace.is_tau(n));
        assert_eq!(row[8] == "1", run.trace.is_w(n));
    }
    assert_eq!(rows.iter().filter(|r| r[9] == "1").count(), 1);

    let mut rbuf = Vec::new();
    write_renewals(&mut rbuf, 2, &renewal_increments(&run)).unwrap();
    assert!(text(rbuf).starts_with("block,w_start,w_end,block_length,perp1,perp2\n"));
}

#[test]
fn tail_csv_has_bound_column() {
    let rep = estimate_psi_tail(2, 10.0, &[0.5, 1.0, 2.0], 200, 1, 1).unwrap();
    let mut buf = Vec::new();
    write_tail(&mut buf, &rep.estimate, Some(&rep.bound)).unwrap();
    let out = text(buf);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "threshold,survival,half_width,bound");
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("1,"));
}
