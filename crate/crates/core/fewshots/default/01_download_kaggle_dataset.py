def download_kaggle_dataset(
    api: kaggle.KaggleApi,
    user: str,
    dataset_name: str,
    target_folder: Path,
    dataset_version: Optional[int] = None,
) -> None:
  """Download a Kaggle dataset and extracts contents to the target folder."""
  target_folder.mkdir(parents=True, exist_ok=True)

  res: response.HTTPResponse = api.datasets_download(
      user, dataset_name,
      dataset_version_number=dataset_version,
      _preload_content=False,
  )

  file_name = dataset_name + '.zip'
  with (target_folder / file_name).open('wb') as f:
    f.write(res.data)

  res.close()

  with zipfile.ZipFile(target_folder / file_name, 'r') as f:
    f.extractall(target_folder)

  os.remove(target_folder / file_name)
