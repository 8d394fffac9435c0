#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "expctr/error.hpp"
#include "expctr/io/checkpoint.hpp"
#include "expctr/io/csv.hpp"
#include "temp_dir.hpp"

namespace expctr::io {
namespace {

using numerics::Parameter;
using numerics::Tensor;

TEST(Checkpoint, RoundTripIsBitExact) {
  testing::TempDir dir;
  Parameter a{"a", Tensor::row({0.1, -1.0 / 3.0, 1e-300}), true};
  Parameter b{"b", Tensor::matrix(2, 2, {1, 2, 3, std::nextafter(4.0, 5.0)}), false};
  write_blocks(dir / "m.ckpt", to_blocks({&a, &b}, "net."));

  Parameter a2{"a", Tensor(a.value.shape()), true};
  Parameter b2{"b", Tensor(b.value.shape()), false};
  load_blocks(read_blocks(dir / "m.ckpt"), {&a2, &b2}, "net.");
  EXPECT_EQ(a2.value, a.value);
  EXPECT_EQ(b2.value, b.value);
}

TEST(Checkpoint, MissingBlockAndShapeMismatchAreRejected) {
  testing::TempDir dir;
  Parameter a{"a", Tensor::row({1, 2, 3}), true};
  write_blocks(dir / "m.ckpt", to_blocks({&a}));
  const auto blocks = read_blocks(dir / "m.ckpt");

  Parameter wrong_shape{"a", Tensor::row({0, 0}), true};
  EXPECT_THROW(load_blocks(blocks, {&wrong_shape}), ValidationError);
  Parameter missing{"zzz", Tensor::row({0, 0, 0}), true};
  EXPECT_THROW(load_blocks(blocks, {&missing}), ValidationError);
}

TEST(Checkpoint, CorruptFileIsRejected) {
  testing::TempDir dir;
  write_text(dir / "bad.ckpt", "not a checkpoint");
  EXPECT_THROW(read_blocks(dir / "bad.ckpt"), ValidationError);
  EXPECT_THROW(read_blocks(dir / "absent.ckpt"), ValidationError);
}

TEST(Csv, DoublesRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-17, 123456789.125, 0.0}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
  EXPECT_EQ(format_double(std::numeric_limits<double>::quiet_NaN()), "nan");
  EXPECT_EQ(format_optional(std::nullopt), "NA");
}

TEST(Csv, WriteReadAndCellCount) {
  testing::TempDir dir;
  CsvTable t({"x", "y"});
  t.add_row({"1", "a"});
  t.add_row({"2", "b"});
  EXPECT_THROW(t.add_row({"3"}), RuntimeFailure);
  t.write(dir / "t.csv");
  const CsvTable back = CsvTable::read(dir / "t.csv");
  EXPECT_EQ(back.header(), t.header());
  EXPECT_EQ(back.rows(), t.rows());
  t.truncate(1);
  EXPECT_EQ(t.size(), 1u);
}

}  // namespace
}  // namespace expctr::io
