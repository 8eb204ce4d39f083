#![allow(clippy::approx_constant)]

// Reference p-values (two-sided, asymptotic, continuity- and tie-corrected)
// and exact A12 values, computed with scipy 'mannwhitneyu' and fractions.
pub const RANK_SUM_CASES: [(&[f64], &[f64], f64, f64); 25] = [
    (
        &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0],
        &[11.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0],
        0.00018267179110955002,
        0.0,
    ),
    (
        &[1.0, 2.0, 3.0],
        &[2.0, 3.0, 4.0],
        0.36868826936178156,
        0.2222222222222222,
    ),
    (&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], 1.0, 0.5),
    (
        &[5.0, 5.0, 5.0, 6.0],
        &[5.0, 6.0, 6.0, 6.0],
        0.24706152509165802,
        0.25,
    ),
    (
        &[3.0, 3.0, 3.0],
        &[3.0, 3.0, 4.0],
        0.5049850750938458,
        0.3333333333333333,
    ),
    (
        &[
            120.0, 139.0, 111.0, 123.0, 138.0, 133.0, 109.0, 110.0, 136.0, 104.0, 131.0, 131.0,
            106.0,
        ],
        &[113.0, 95.0, 127.0, 107.0, 117.0, 104.0, 101.0],
        0.04315418598498906,
        0.7857142857142857,
    ),
    (
        &[
            11.0, 8.0, 10.0, 9.0, 3.0, 3.0, 0.0, 9.0, 2.0, 5.0, 9.0, 10.0, 4.0, 7.0, 6.0, 1.0, 0.0,
            11.0, 6.0,
        ],
        &[
            9.0, 4.0, 3.0, 8.0, 13.0, 5.0, 12.0, 5.0, 6.0, 5.0, 12.0, 7.0, 5.0, 12.0,
        ],
        0.2972600264334452,
        0.39097744360902253,
    ),
    (
        &[
            1.369, -0.408, 0.756, 0.225, 1.697, -1.962, 0.874, -1.024, -0.869, -0.018, -1.511,
            -1.195, -0.506, -0.322, -1.904, -0.874, -0.146, -0.132,
        ],
        &[
            -0.493, 0.494, -0.27, 2.26, -0.714, 0.589, -0.234, 1.782, -0.957, 1.815, -1.293, -1.55,
        ],
        0.4335287866464803,
        0.41203703703703703,
    ),
    (
        &[106.0, 120.0, 130.0, 135.0],
        &[
            98.0, 111.0, 122.0, 97.0, 112.0, 113.0, 108.0, 105.0, 120.0, 120.0, 114.0, 116.0,
            122.0, 121.0, 123.0, 102.0, 105.0, 115.0,
        ],
        0.13563916250027985,
        0.75,
    ),
    (
        &[
            2.0, 1.0, 6.0, 11.0, 3.0, 8.0, 5.0, 7.0, 9.0, 1.0, 5.0, 5.0, 11.0, 5.0, 2.0, 8.0, 4.0,
            11.0,
        ],
        &[
            3.0, 10.0, 2.0, 4.0, 8.0, 11.0, 8.0, 11.0, 7.0, 5.0, 5.0, 7.0, 2.0, 5.0, 3.0, 11.0,
            8.0, 9.0, 4.0, 2.0, 4.0, 3.0, 11.0, 6.0,
        ],
        0.7104585047169321,
        0.4652777777777778,
    ),
    (
        &[
            -0.911, 1.079, 0.878, 1.698, 0.39, 0.946, 1.812, 0.203, -0.5, -1.451, 0.286, -1.267,
            1.098, 0.147, 0.811, 0.163, 1.238,
        ],
        &[
            -0.185, 0.575, 2.6, -1.387, 0.789, 1.963, -1.095, -0.55, -1.375, 2.271, 0.216, 0.027,
            -1.619,
        ],
        0.4265068958101421,
        0.5882352941176471,
    ),
    (
        &[
            127.0, 111.0, 127.0, 105.0, 125.0, 105.0, 111.0, 101.0, 102.0, 106.0, 127.0, 117.0,
        ],
        &[
            106.0, 110.0, 115.0, 95.0, 105.0, 99.0, 109.0, 128.0, 112.0, 113.0, 101.0, 103.0,
            105.0, 119.0, 97.0, 129.0, 112.0, 114.0, 104.0,
        ],
        0.38237611008716377,
        0.5964912280701754,
    ),
    (
        &[9.0, 7.0, 8.0, 10.0, 6.0, 11.0, 11.0],
        &[
            8.0, 6.0, 12.0, 2.0, 5.0, 9.0, 12.0, 9.0, 7.0, 12.0, 7.0, 8.0, 3.0, 7.0, 3.0, 9.0, 5.0,
            12.0, 11.0, 9.0,
        ],
        0.5213361563211274,
        0.5857142857142857,
    ),
    (
        &[-0.952, -1.098, 1.283],
        &[
            2.096, 1.342, -0.553, 1.388, 1.171, 2.35, 0.849, -1.922, 0.176, 0.459,
        ],
        0.27189871081964834,
        0.26666666666666666,
    ),
    (
        &[
            114.0, 112.0, 105.0, 102.0, 127.0, 124.0, 122.0, 128.0, 126.0, 110.0, 133.0, 124.0,
            104.0, 123.0, 113.0, 122.0, 109.0, 129.0, 107.0, 108.0, 135.0, 115.0, 120.0,
        ],
        &[106.0, 100.0, 114.0, 109.0, 117.0, 125.0, 128.0],
        0.47684385052087175,
        0.593167701863354,
    ),
    (
        &[0.0, 10.0, 10.0, 6.0, 11.0],
        &[3.0, 12.0, 9.0],
        1.0,
        0.4666666666666667,
    ),
    (
        &[-0.318, 0.79, 0.958, 0.49, -0.541, 0.628, 0.154],
        &[2.269, 1.085, -0.694],
        0.4941245444092638,
        0.3333333333333333,
    ),
    (
        &[125.0, 112.0, 139.0, 103.0, 134.0, 134.0],
        &[
            105.0, 100.0, 112.0, 119.0, 115.0, 121.0, 105.0, 104.0, 104.0, 116.0, 95.0, 127.0,
            113.0, 96.0, 107.0,
        ],
        0.051321716461803724,
        0.7833333333333333,
    ),
    (
        &[
            9.0, 5.0, 4.0, 3.0, 1.0, 10.0, 1.0, 1.0, 6.0, 0.0, 3.0, 10.0, 11.0, 6.0, 2.0, 8.0, 9.0,
            10.0, 11.0,
        ],
        &[5.0, 5.0, 10.0, 9.0, 9.0, 2.0, 6.0, 9.0, 8.0, 6.0],
        0.5794707241465558,
        0.4342105263157895,
    ),
    (
        &[
            -1.504, -0.859, 0.16, 0.369, -0.624, -0.702, -0.027, 0.125, 1.964, -0.384, 0.537,
            -1.713,
        ],
        &[
            0.349, 0.018, -1.433, -0.956, -0.468, -0.673, -2.347, 0.014, 0.352, 0.041, 1.722,
            0.243, 0.649, 0.446, 0.675, -1.09, 0.069,
        ],
        0.6419688279727049,
        0.44607843137254904,
    ),
    (
        &[
            133.0, 101.0, 137.0, 107.0, 125.0, 105.0, 101.0, 124.0, 100.0, 123.0, 110.0, 106.0,
            125.0, 126.0, 112.0, 114.0, 105.0, 108.0, 110.0, 139.0,
        ],
        &[
            120.0, 103.0, 106.0, 110.0, 123.0, 128.0, 101.0, 110.0, 111.0, 128.0, 118.0, 102.0,
            103.0, 116.0, 101.0, 120.0, 113.0,
        ],
        0.593211984254396,
        0.5529411764705883,
    ),
    (
        &[8.0, 7.0, 10.0],
        &[
            13.0, 9.0, 13.0, 2.0, 12.0, 9.0, 2.0, 4.0, 13.0, 11.0, 11.0, 8.0, 12.0, 3.0, 10.0, 5.0,
            4.0, 3.0, 5.0, 4.0, 12.0, 9.0,
        ],
        0.9665065675404376,
        0.48484848484848486,
    ),
    (
        &[
            -0.269, -0.884, 1.875, 1.575, 0.305, 1.466, -0.793, -1.33, 0.253, 1.803, -0.228, 0.754,
            1.259, 0.044, 0.841, -0.661,
        ],
        &[
            2.435, 1.132, 0.601, -0.445, -3.783, 0.978, 0.504, 0.326, -0.096, 3.327, 0.37,
        ],
        0.5703858444523079,
        0.4318181818181818,
    ),
    (
        &[120.0, 109.0, 125.0],
        &[
            109.0, 125.0, 100.0, 108.0, 115.0, 103.0, 98.0, 113.0, 100.0, 126.0, 102.0,
        ],
        0.2113999860960193,
        0.7575757575757576,
    ),
    (
        &[8.0, 9.0, 0.0, 1.0],
        &[6.0, 6.0, 10.0],
        0.5925602769166511,
        0.3333333333333333,
    ),
];
