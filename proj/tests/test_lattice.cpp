#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "lattopt/lattice.hpp"

using namespace lattopt;

namespace {
UnitGrid grid_of(int nx, int ny, bool symmetry = false, double cell = 2.5e-3) {
    UnitGrid g;
    g.cell_size = cell;
    g.n_cells_x = nx;
    g.n_cells_y = ny;
    g.symmetry = symmetry;
    return g;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / name;
}
} // namespace

TEST_CASE("single-cell BCC topology", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(1, 1);
    DesignField d = DesignField::constant(1, 0.0, 1.0);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 1);
    CHECK(bg.node_count() == 9);
    CHECK(bg.strut_count() == 8);
    for (const Strut& s : bg.struts) CHECK(s.diameter == Catch::Approx(1.3e-3));
    // every strut runs from the centre to a corner: length = sqrt(3)/2 * L
    for (const Strut& s : bg.struts) {
        const Vec3 d3 = bg.nodes[static_cast<size_t>(s.node_a)] - bg.nodes[static_cast<size_t>(s.node_b)];
        CHECK(d3.norm() == Catch::Approx(std::sqrt(3.0) / 2.0 * g.cell_size).epsilon(1e-12));
    }
}

TEST_CASE("adjacent cells share corner nodes", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(2, 1);
    DesignField d = DesignField::constant(2, 0.0, 0.5);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 1);
    // hand count: 2 centres + (8 + 8 - 4 shared-face) corners = 14
    CHECK(bg.node_count() == 14);
    CHECK(bg.strut_count() == 16);
}

TEST_CASE("full stack strut count", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(20, 20);
    DesignField d = DesignField::constant(400, 0.0, 0.3);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 2);
    CHECK(bg.strut_count() == 8 * 400 * 2);  // 6400 struts
}

TEST_CASE("void cells are skipped and empty graphs refuse STL export", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(3, 3);
    DesignField d = DesignField::constant(9, 1.0, 0.5);  // all void
    d.gamma1[4] = 0.2;                                   // single lattice cell survives
    const BeamGraph bg = reconstruct_lattice(d, table, g, 1, 0.5);
    CHECK(bg.strut_count() == 8);

    DesignField all_void = DesignField::constant(9, 1.0, 0.5);
    const BeamGraph empty = reconstruct_lattice(all_void, table, g, 1);
    CHECK(empty.strut_count() == 0);
    CHECK_THROWS_AS(export_stl(empty, 16, temp_file("empty.stl").string()), std::invalid_argument);
}

TEST_CASE("half-domain designs are mirrored to full width", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(2, 3, /*symmetry=*/true);
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> dist(0, 1);
    DesignField d = DesignField::constant(6, 0.0, 0.0);
    for (int c = 0; c < 6; ++c) d.gamma2[static_cast<size_t>(c)] = dist(rng);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 1);
    CHECK(bg.strut_count() == 8 * 2 * (2 * 3));

    // node set is symmetric about the full-width centreline y = 3 * L
    const double y_mid = 3.0 * g.cell_size;
    std::set<std::array<long long, 3>> keys;
    auto key = [](const Vec3& p) {
        return std::array<long long, 3>{std::llround(p.x * 1e9), std::llround(p.y * 1e9),
                                        std::llround(p.z * 1e9)};
    };
    for (const Vec3& p : bg.nodes) keys.insert(key(p));
    for (const Vec3& p : bg.nodes) {
        Vec3 m{p.x, 2.0 * y_mid - p.y, p.z};
        CHECK(keys.count(key(m)) == 1);
    }
}

TEST_CASE("diameters follow the affine map and stay in range", "[lattice]") {
    const auto table = default_property_table(0.3e-3, 0.6e-3, 1.25e-3);
    UnitGrid g = grid_of(4, 4, false, 1.25e-3);
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> dist(0, 1);
    DesignField d = DesignField::constant(16, 0.0, 0.0);
    for (int c = 0; c < 16; ++c) d.gamma2[static_cast<size_t>(c)] = dist(rng);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 4);
    for (const Strut& s : bg.struts) {
        CHECK(s.diameter >= 0.3e-3 - 1e-15);
        CHECK(s.diameter <= 0.6e-3 + 1e-15);
    }
}

TEST_CASE("beam CSV round-trip is exact", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(3, 2);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> dist(0, 1);
    DesignField d = DesignField::constant(6, 0.0, 0.0);
    for (int c = 0; c < 6; ++c) {
        d.gamma1[static_cast<size_t>(c)] = dist(rng) < 0.7 ? 0.0 : 1.0;
        d.gamma2[static_cast<size_t>(c)] = dist(rng);
    }
    const BeamGraph bg = reconstruct_lattice(d, table, g, 2);
    const auto path = temp_file("beams_roundtrip.csv");
    export_beams(bg, path.string());
    const BeamGraph back = import_beams(path.string());
    REQUIRE(back.strut_count() == bg.strut_count());
    REQUIRE(back.node_count() == bg.node_count());
    for (int s = 0; s < bg.strut_count(); ++s) {
        const Strut& a = bg.struts[static_cast<size_t>(s)];
        const Strut& b = back.struts[static_cast<size_t>(s)];
        CHECK(b.diameter == a.diameter);
        const Vec3 pa = bg.nodes[static_cast<size_t>(a.node_a)], pb = back.nodes[static_cast<size_t>(b.node_a)];
        CHECK(pa.x == pb.x);
        CHECK(pa.y == pb.y);
        CHECK(pa.z == pb.z);
    }
    std::filesystem::remove(path);
}

TEST_CASE("empty graph exports a header-only CSV", "[lattice]") {
    BeamGraph g;
    const auto path = temp_file("beams_empty.csv");
    export_beams(g, path.string());
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line == "xa,ya,za,xb,yb,zb,d");
    CHECK_FALSE(std::getline(in, line));
    std::filesystem::remove(path);
}

TEST_CASE("binary STL has the tessellation-formula triangle count", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(1, 1);
    DesignField d = DesignField::constant(1, 0.0, 0.5);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 1);
    const auto path = temp_file("cell.stl");
    for (int sides : {8, 16}) {
        export_stl(bg, sides, path.string());
        std::ifstream in(path, std::ios::binary);
        in.seekg(80);
        std::uint32_t n = 0;
        in.read(reinterpret_cast<char*>(&n), 4);
        const std::uint32_t want = 8u * static_cast<std::uint32_t>(strut_triangle_count(sides));
        CHECK(n == want);
        if (sides == 16) CHECK(n == 8u * (2u * 16u + 2u * (16u - 2u)));
        // file size must match: 84-byte preamble + 50 bytes per triangle
        in.seekg(0, std::ios::end);
        CHECK(static_cast<std::uint64_t>(in.tellg()) == 84u + 50u * static_cast<std::uint64_t>(n));
    }
    std::filesystem::remove(path);
}

TEST_CASE("node coordinates stay inside the padded design box", "[lattice]") {
    const auto table = default_property_table();
    UnitGrid g = grid_of(5, 4);
    DesignField d = DesignField::constant(20, 0.0, 1.0);
    const BeamGraph bg = reconstruct_lattice(d, table, g, 2);
    const double pad = table.d_max() / 2.0;
    for (const Vec3& p : bg.nodes) {
        CHECK(p.x >= -pad);
        CHECK(p.x <= 5 * g.cell_size + pad);
        CHECK(p.y >= -pad);
        CHECK(p.y <= 4 * g.cell_size + pad);
        CHECK(p.z >= -pad);
        CHECK(p.z <= 2 * g.cell_size + pad);
    }
}
