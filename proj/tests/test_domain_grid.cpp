#include <catch_amalgamated.hpp>

#include <bihlab/domain_grid.hpp>
#include <cstdio>
#include <filesystem>

using namespace bihlab;

template <class F>
static ErrorCode error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error raised");
  return ErrorCode::ConfigError;
}

TEST_CASE("node counts") {
  CHECK(build_domain(unit_grid(8), ShapeDescriptor::full_box()).num_active() == 512);
  const GridSpec g = unit_grid(9);
  CHECK(build_domain(g, ShapeDescriptor::centered_cavity(g, 3)).num_active() == 702);
  CHECK(build_domain(g, ShapeDescriptor::box_minus_box({3, 3, 3}, {5, 5, 5})).num_active() == 702);
}

TEST_CASE("index and coords are inverse") {
  const GridSpec g{{3, 4, 5}, 0.5};
  for (int i = 0; i < g.num_nodes(); ++i) CHECK(g.index(g.coords(i)) == i);
  CHECK(g.coords(1) == Index3{1, 0, 0});
  CHECK(g.coords(3) == Index3{0, 1, 0});
}

TEST_CASE("invalid grids and disconnected domains are rejected") {
  CHECK(error_of([] { GridSpec{{1, 4, 4}, 0.1}.validate(); }) == ErrorCode::ConfigError);
  CHECK(error_of([] { GridSpec{{4, 4, 4}, 0.0}.validate(); }) == ErrorCode::ConfigError);
  // a slab through the whole box splits it in two
  const GridSpec g = unit_grid(6);
  CHECK(error_of([&] { build_domain(g, ShapeDescriptor::box_minus_box({2, 0, 0}, {2, 5, 5})); }) ==
        ErrorCode::Disconnected);
  CHECK(error_of([&] { build_domain(g, ShapeDescriptor::box_minus_box({0, 0, 0}, {5, 5, 5})); }) == ErrorCode::Empty);
}

TEST_CASE("mask file round trip") {
  const auto path = (std::filesystem::temp_directory_path() / "bihlab_mask_test.vox").string();
  const GridSpec g = unit_grid(5);
  const VoxelDomain a = build_domain(g, ShapeDescriptor::centered_cavity(g, 1));
  write_voxmask(path, g.dims, a.active);
  const VoxelDomain b = build_domain(g, ShapeDescriptor::mask_file(path));
  CHECK(b.active == a.active);
  CHECK(b.num_active() == 124);
  std::remove(path.c_str());
}

TEST_CASE("boundary partitions") {
  const GridSpec g = unit_grid(5);
  const VoxelDomain dom = build_domain(g, ShapeDescriptor::full_box());
  const int faces = 6 * 25;
  const BoundaryPartition t = partition_boundary(dom, selectors::all_t());
  CHECK(static_cast<int>(t.faces.size()) == faces);
  CHECK(t.num_t() == faces);
  CHECK(t.num_n() == 0);
  const BoundaryPartition n = partition_boundary(dom, selectors::all_n());
  CHECK(n.num_t() == 0);
  const BoundaryPartition h = partition_boundary(dom, selectors::half_split(g, 0));
  CHECK(h.num_t() + h.num_n() == faces);
  // plane at x = 2: the x=0 face (25), and the y/z faces of columns x = 0, 1 (4 faces x 10 nodes)
  CHECK(h.num_t() == 25 + 40);

  const VoxelDomain cav = build_domain(g, ShapeDescriptor::centered_cavity(g, 1));
  const BoundaryPartition pc = partition_boundary(cav, selectors::all_n());
  CHECK(static_cast<int>(pc.faces.size()) == faces + 6);
}

TEST_CASE("band masks") {
  const GridSpec g = unit_grid(8);
  const VoxelDomain dom = build_domain(g, ShapeDescriptor::full_box());
  const BoundaryPartition p = partition_boundary(dom, selectors::all_t());
  const auto masks = build_masks(dom, p, {"scalar", "sym", "dev"}, {2, 1, 0});
  CHECK(masks[0].num_kept() == 4 * 4 * 4);
  for (int i = 0; i < g.num_nodes(); ++i) {
    const Index3 x = g.coords(i);
    bool inner = true;
    for (int m = 0; m < 3; ++m) inner = inner && x[m] >= 2 && x[m] <= 5;
    CHECK(static_cast<bool>(masks[0].keep[i]) == inner);
  }
  CHECK(masks[1].num_kept() == 6 * 6 * 6);
  CHECK(masks[2].num_kept() == 512);
  CHECK(error_of([&] { build_masks(dom, p, {"scalar", "sym"}, {0, 1}); }) == ErrorCode::IncompatibleWidths);

  const BoundaryPartition none = partition_boundary(dom, selectors::all_n());
  CHECK(build_mask(dom, none, "scalar", 3).num_kept() == 512);
}
