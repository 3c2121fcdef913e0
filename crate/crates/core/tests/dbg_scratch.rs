#[test]
fn dbg_lmi() {
    std::env::set_var("DDMRC_CONIC_DEBUG", "1");
    use ddmrc::linalg::Mat;
    let cfg = ddmrc::NumericConfig::default();
    let data = ddmrc::exact_mrc::DataSet::new(
        Mat::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.5, 1.0, 0.0, 1.0, 0.0]),
        Mat::from_row_slice(2, 3, &[1.0, -1.0, 0.0, 1.0, -1.0, 1.0]),
    ).unwrap();
    // unreachable target: B_m = I
    let model = ddmrc::exact_mrc::ReferenceModel::new(
        Mat::from_row_slice(2, 2, &[-0.5, 0.5, 0.0, -0.5]),
        Mat::identity(2, 2),
    ).unwrap();
    let out = ddmrc::exact_mrc::check_exact_informativity_lmi(&data, &model, &cfg);
    println!("outcome: {:?}", out);
}
